#!/usr/bin/env python3
"""
Tests for key-phrase scoring and the key-phrase word vectors
"""
import os
import sys
import math
import tempfile
sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), 'src'))

import numpy as np

from corpus import Chunk
from vocab import RESERVED_TOKENS, Vocabulary, encode_extended
from keyphrase import (FileKeyPhraseScorer, KeyPhrase, PrecomputedKeyPhraseScorer, TfidfKeyPhraseScorer,
                       UnscoredKeyPhraseScorer, build_keyphrase_vector, extract_keyphrases, keyphrase_vector_for,
                       make_scorer, phrase_word_probs, reduce_keyphrase_vector, write_keyphrase_file)

VOCAB = Vocabulary(RESERVED_TOKENS + ("rescue", "team", "flood", "now", "aid", "camp"))


def test_top_phrase_scores_one():
    phrases = extract_keyphrases(Chunk(["rescue", "team"]), TfidfKeyPhraseScorer())
    assert phrases[0].tokens == ["rescue", "team"]
    assert phrases[0].score == 1.0
    assert all(0.0 <= p.score <= 1.0 for p in phrases)


def test_single_token_source():
    phrases = extract_keyphrases(Chunk(["flood"]), TfidfKeyPhraseScorer())
    assert phrases == [KeyPhrase(["flood"], 1.0)]


def test_empty_source_gives_no_phrases():
    assert extract_keyphrases(Chunk([]), TfidfKeyPhraseScorer()) == []


def test_stopwords_never_inside_phrases():
    scorer = TfidfKeyPhraseScorer(stopwords={"now"})
    phrases = extract_keyphrases(Chunk(["rescue", "now", "team"]), scorer)
    assert all("now" not in p.tokens for p in phrases)
    assert ["rescue", "now", "team"] not in [p.tokens for p in phrases]


def test_fitted_idf_prefers_rare_terms():
    chunks = [Chunk(["flood", "aid"]), Chunk(["flood", "camp"]), Chunk(["flood", "rescue"])]
    scorer = TfidfKeyPhraseScorer(max_ngram=1).fit(chunks)
    assert scorer.idf("rescue") > scorer.idf("flood")
    phrases = scorer.extract(chunks[2])
    assert phrases[0].tokens == ["rescue"]


def test_unseen_term_idf_above_every_fitted_term():
    chunks = [Chunk(["flood", "aid"]), Chunk(["flood", "camp"])]
    scorer = TfidfKeyPhraseScorer(max_ngram=1).fit(chunks)
    assert scorer.idf("flood") == 1.0
    assert abs(scorer.idf("aid") - (math.log(3 / 2) + 1.0)) < 1e-12
    assert abs(scorer.idf("rescue") - (math.log(3) + 1.0)) < 1e-12
    assert TfidfKeyPhraseScorer().idf("rescue") == 1.0


def test_top_k_limits_phrases():
    scorer = TfidfKeyPhraseScorer(top_k=2)
    assert len(scorer.extract(Chunk(["rescue", "team", "flood", "aid"]))) == 2


def test_keyphrase_file_passthrough():
    phrases = {0: [KeyPhrase(["rescue", "team"], 0.8)], 2: [KeyPhrase(["flood"], 0.25)]}
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, 'kp.jsonl')
        write_keyphrase_file(path, phrases)
        scorer = FileKeyPhraseScorer(path)
        assert scorer.extract(Chunk(["rescue"]), 0) == phrases[0]
        assert scorer.extract(Chunk(["flood"]), 2) == phrases[2]
        assert scorer.extract(Chunk(["flood"]), 1) == []
        assert make_scorer([], keyphrase_file=path).extract(Chunk(["flood"]), 2) == phrases[2]


def test_unscored_scorer_sets_scores_to_one():
    inner = PrecomputedKeyPhraseScorer({0: [KeyPhrase(["flood"], 0.2), KeyPhrase(["aid", "camp"], 0.5)]})
    phrases = UnscoredKeyPhraseScorer(inner).extract(Chunk(["flood"]), 0)
    assert [p.score for p in phrases] == [1.0, 1.0]
    assert [p.tokens for p in phrases] == [["flood"], ["aid", "camp"]]


def test_phrase_word_probs():
    assert phrase_word_probs(KeyPhrase(["rescue", "team"], 1.0)) == {"rescue": 0.5, "team": 0.5}
    assert phrase_word_probs(KeyPhrase(["fire"], 1.0)) == {"fire": 1.0}
    probs = phrase_word_probs(KeyPhrase(["aid", "aid", "camp"], 1.0))
    assert abs(probs["aid"] - 2 / 3) < 1e-12 and abs(probs["camp"] - 1 / 3) < 1e-12
    assert abs(sum(probs.values()) - 1.0) < 1e-12


def test_keyphrase_vector_single_phrase():
    gamma = build_keyphrase_vector([KeyPhrase(["rescue", "team"], 0.8)], VOCAB).gamma
    assert gamma.shape == (VOCAB.size,)
    assert abs(gamma[VOCAB.id_of("rescue")] - 0.4) < 1e-12
    assert abs(gamma[VOCAB.id_of("team")] - 0.4) < 1e-12
    assert np.count_nonzero(gamma) == 2


def test_keyphrase_vector_empty_and_shared_words():
    assert not np.any(build_keyphrase_vector([], VOCAB).gamma)
    gamma = build_keyphrase_vector([KeyPhrase(["flood", "aid"], 0.5), KeyPhrase(["flood"], 1.0)], VOCAB).gamma
    assert abs(gamma[VOCAB.id_of("flood")] - 1.25) < 1e-12


def test_zero_scores_give_zero_vector_and_oov_words_dropped():
    gamma = build_keyphrase_vector([KeyPhrase(["flood", "kochi"], 0.0)], VOCAB).gamma
    assert not np.any(gamma)
    gamma = build_keyphrase_vector([KeyPhrase(["kochi"], 1.0)], VOCAB).gamma
    assert not np.any(gamma)


def test_reduced_vector():
    gamma = build_keyphrase_vector([KeyPhrase(["rescue", "team"], 0.8)], VOCAB)
    encoding = encode_extended(["rescue", "team", "now", "kochi", "rescue"], VOCAB)
    gamma_bar = reduce_keyphrase_vector(gamma, encoding).gamma_bar
    assert np.allclose(gamma_bar, [0.4, 0.4, 0.0, 0.0, 0.4], atol=1e-12)
    assert gamma_bar[0] == gamma_bar[4]


def test_keyphrase_vector_for_chunk():
    chunk = Chunk(["rescue", "team", "kochi"])
    encoding = encode_extended(chunk.source_tokens, VOCAB)
    scorer = PrecomputedKeyPhraseScorer({0: [KeyPhrase(["rescue", "kochi"], 1.0)]})
    gamma_bar = keyphrase_vector_for(chunk, encoding, VOCAB, scorer).gamma_bar
    assert np.allclose(gamma_bar, [0.5, 0.0, 0.0])


def test_keyphrase_validation():
    for tokens, score in (([], 0.5), (["flood"], 1.5), (["flood"], -0.1)):
        try:
            KeyPhrase(tokens, score)
        except ValueError:
            continue
        raise AssertionError(f"invalid key-phrase {tokens} {score} accepted")


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
