import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.feature_extraction.text import TfidfVectorizer

from corpus import Chunk, MAX_SOURCE_TOKENS

logger = logging.getLogger(__name__)


@dataclass
class RankedTweet:
    tweet: List[str]
    score: float
    rank: int
    tweet_id: str = ''


class Ranker:
    """Base class for Phase-I tweet rankers"""

    def __init__(self, name: str):
        self.name = name

    def score(self, tweets: Sequence[Sequence[str]]) -> List[float]:
        """Importance score for every tweet"""
        raise NotImplementedError

    def order(self, tweets: Sequence[Sequence[str]]) -> List[Tuple[int, float]]:
        """(input index, score) pairs in rank order; ties keep input order"""
        scores = self.score(tweets)
        return sorted(enumerate(scores), key=lambda item: -item[1])


class TfidfRanker(Ranker):
    """
    Content-word TF-IDF ranking: a tweet scores the sum of the TF-IDF weights
    of its tokens, with smoothed document frequencies taken over the tweet set.
    Content words are approximated by non-stopword tokens.
    """

    def __init__(self, stopwords: Iterable[str] = ()):
        super().__init__("TF-IDF Content-word Ranker")
        self.stopwords = frozenset(stopwords)

    def content_words(self, tweet: Sequence[str]) -> List[str]:
        return [token for token in tweet if token not in self.stopwords]

    def score(self, tweets: Sequence[Sequence[str]]) -> List[float]:
        if not any(self.content_words(tweet) for tweet in tweets):
            return [0.0] * len(tweets)
        vectorizer = TfidfVectorizer(analyzer=self.content_words, smooth_idf=True, norm=None)
        weights = vectorizer.fit_transform(tweets)
        return [float(s) for s in np.asarray(weights.sum(axis=1)).ravel()]


class LeadRanker(Ranker):
    """Keeps the input order"""

    def __init__(self):
        super().__init__("Lead Ranker")

    def score(self, tweets: Sequence[Sequence[str]]) -> List[float]:
        n = len(tweets)
        return [float(n - i) for i in range(n)]


class FileRanker(Ranker):
    """Precomputed ranking: one tweet index per line, best first"""

    def __init__(self, path: str):
        super().__init__("Ranking File")
        self.path = path
        self.ranking = load_ranking_file(path)

    def order(self, tweets: Sequence[Sequence[str]]) -> List[Tuple[int, float]]:
        n = len(tweets)
        seen = set()
        indices = []
        for index in self.ranking:
            if not 0 <= index < n:
                raise ValueError(f"{self.path}: tweet index {index} out of range for {n} tweets")
            if index in seen:
                raise ValueError(f"{self.path}: tweet index {index} listed twice")
            seen.add(index)
            indices.append(index)

        missing = [i for i in range(n) if i not in seen]
        if missing:
            logger.warning(f"{len(missing)} tweets absent from {self.path}, ranked last in input order")
            indices.extend(missing)
        return [(index, float(n - position)) for position, index in enumerate(indices)]

    def score(self, tweets: Sequence[Sequence[str]]) -> List[float]:
        scores = [0.0] * len(tweets)
        for index, score in self.order(tweets):
            scores[index] = score
        return scores


def load_ranking_file(path: str) -> List[int]:
    ranking = []
    with open(path, 'r', encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            if not line.isdigit():
                raise ValueError(f"{path}:{line_number}: expected a tweet index, got '{line}'")
            ranking.append(int(line))
    return ranking


def rank_tweets(tweets: Sequence[Sequence[str]], ranker: Ranker,
                tweet_ids: Optional[Sequence[str]] = None) -> List[RankedTweet]:
    """Rank preprocessed tweets, best first, ranks 1..n"""
    if tweet_ids is None:
        tweet_ids = [str(i) for i in range(len(tweets))]
    ranked = [
        RankedTweet(tweet=list(tweets[index]), score=score, rank=rank, tweet_id=tweet_ids[index])
        for rank, (index, score) in enumerate(ranker.order(tweets), start=1)
    ]
    logger.debug(f"{ranker.name} ranked {len(ranked)} tweets")
    return ranked


def select_until_budget(ranked: Sequence[RankedTweet], budget: int = MAX_SOURCE_TOKENS) -> Chunk:
    """Take tweets in rank order while they fit in the budget; stop at the first one that does not"""
    if budget <= 0:
        raise ValueError(f"Budget must be positive, got {budget}")

    tokens: List[str] = []
    origin_ids: List[str] = []
    for item in ranked:
        if len(tokens) + len(item.tweet) > budget:
            break
        tokens.extend(item.tweet)
        origin_ids.append(item.tweet_id)

    logger.info(f"Phase-I selected {len(origin_ids)} of {len(ranked)} tweets ({len(tokens)}/{budget} tokens)")
    return Chunk(source_tokens=tokens, origin_ids=origin_ids)
