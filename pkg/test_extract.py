#!/usr/bin/env python3
"""
Tests for Phase-I ranking and budgeted tweet selection
"""
import os
import sys
import math
import tempfile
sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), 'src'))

from extract import FileRanker, LeadRanker, RankedTweet, TfidfRanker, rank_tweets, select_until_budget


def ranked_of_lengths(*lengths):
    return [RankedTweet(tweet=[f"t{i}w{j}" for j in range(n)], score=float(-i), rank=i + 1, tweet_id=str(i))
            for i, n in enumerate(lengths)]


def test_identical_tweets_keep_input_order():
    ranked = rank_tweets([["flood", "kochi"], ["flood", "kochi"]], TfidfRanker())
    assert ranked[0].score == ranked[1].score
    assert [r.tweet_id for r in ranked] == ['0', '1']
    assert [r.rank for r in ranked] == [1, 2]


def test_rare_content_ranks_first():
    tweets = [["flood", "rain"], ["flood", "rain"], ["flood", "bridge", "collapsed"]]
    ranked = rank_tweets(tweets, TfidfRanker())
    assert ranked[0].tweet_id == '2'
    # idf(flood) = ln(4/4) + 1, idf(bridge) = idf(collapsed) = ln(4/2) + 1
    assert abs(ranked[0].score - (1.0 + 2 * (math.log(2.0) + 1.0))) < 1e-12


def test_empty_tweet_ranked_last():
    ranked = rank_tweets([[], ["flood"]], TfidfRanker())
    assert ranked[-1].tweet_id == '0'
    assert ranked[-1].score == 0.0


def test_stopwords_do_not_score():
    ranked = rank_tweets([["the", "the", "the"], ["flood"]], TfidfRanker(stopwords={"the"}))
    assert ranked[0].tweet_id == '1'


def test_all_stopword_tweets_score_zero():
    ranked = rank_tweets([["the"], [], ["the", "the"]], TfidfRanker(stopwords={"the"}))
    assert [r.score for r in ranked] == [0.0, 0.0, 0.0]
    assert [r.tweet_id for r in ranked] == ['0', '1', '2']


def test_scores_non_increasing_and_ranks_are_permutation():
    tweets = [["aaa", "bbb"], ["ccc"], ["aaa"], ["ddd", "eee", "fff"]]
    ranked = rank_tweets(tweets, TfidfRanker())
    assert sorted(r.rank for r in ranked) == [1, 2, 3, 4]
    assert all(a.score >= b.score for a, b in zip(ranked, ranked[1:]))


def test_lead_ranker_keeps_input_order():
    ranked = rank_tweets([["ccc"], ["aaa", "bbb", "ddd"], ["eee"]], LeadRanker())
    assert [r.tweet_id for r in ranked] == ['0', '1', '2']


def test_file_ranker_order_and_missing_indices():
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, 'ranking.txt')
        with open(path, 'w') as f:
            f.write("2\n0\n")
        ranked = rank_tweets([["aaa"], ["bbb"], ["ccc"]], FileRanker(path))
        assert [r.tweet_id for r in ranked] == ['2', '0', '1']

        with open(path, 'w') as f:
            f.write("5\n")
        try:
            rank_tweets([["aaa"]], FileRanker(path))
        except ValueError:
            return
    raise AssertionError("out-of-range index accepted")


def test_budget_stops_at_first_violation():
    chunk = select_until_budget(ranked_of_lengths(150, 200, 120), budget=400)
    assert len(chunk.source_tokens) == 350
    assert chunk.origin_ids == ['0', '1']


def test_budget_does_not_skip_ahead():
    chunk = select_until_budget(ranked_of_lengths(150, 300, 10), budget=400)
    assert chunk.origin_ids == ['0']


def test_exact_fit_and_oversized_first_tweet():
    assert len(select_until_budget(ranked_of_lengths(400), budget=400).source_tokens) == 400
    chunk = select_until_budget(ranked_of_lengths(401, 5), budget=400)
    assert chunk.source_tokens == []
    assert chunk.origin_ids == []


def main():
    tests = [(name, fn) for name, fn in sorted(globals().items()) if name.startswith('test_') and callable(fn)]
    failed = 0
    for name, fn in tests:
        try:
            fn()
            print(f"✅ {name}")
        except Exception as e:
            failed += 1
            print(f"❌ {name}: {e!r}")
    print(f"\n{len(tests) - failed}/{len(tests)} passed")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
