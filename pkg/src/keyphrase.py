import json
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional

import numpy as np
from sklearn.feature_extraction.text import TfidfVectorizer

from corpus import Chunk, DatasetFormatError, pretokenized
from vocab import ExtendedEncoding, UNK_ID, RESERVED_TOKENS, Vocabulary

logger = logging.getLogger(__name__)


@dataclass
class KeyPhrase:
    tokens: List[str]
    score: float

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("Key-phrase must contain at least one token")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"Key-phrase score {self.score} outside [0, 1]")


@dataclass
class KeyphraseVector:
    gamma: np.ndarray


@dataclass
class ReducedKeyphraseVector:
    gamma_bar: np.ndarray


class KeyPhraseScorer:
    """Base class for key-phrase providers"""

    def __init__(self, name: str):
        self.name = name

    def extract(self, chunk: Chunk, chunk_index: int = 0) -> List[KeyPhrase]:
        """Return scored key-phrases for one chunk"""
        raise NotImplementedError


class TfidfKeyPhraseScorer(KeyPhraseScorer):
    """
    Default scorer: every 1-3 gram of non-stopword tokens is a candidate,
    scored by the sum of its members' TF-IDF weights within the chunk and
    max-normalized so the best phrase scores 1.0.
    Inverse document frequencies come from a smoothed TfidfVectorizer fitted
    in fit(); an unfitted scorer uses idf = 1.
    """

    def __init__(self, stopwords: Iterable[str] = (), max_ngram: int = 3, top_k: Optional[int] = None):
        super().__init__("TF-IDF Key-phrase Scorer")
        self.stopwords: FrozenSet[str] = frozenset(stopwords)
        self.max_ngram = max_ngram
        self.top_k = top_k or None
        self.vectorizer: Optional[TfidfVectorizer] = None
        self.num_documents = 0

    def fit(self, chunks: Iterable[Chunk]) -> 'TfidfKeyPhraseScorer':
        documents = [chunk.source_tokens for chunk in chunks]
        if not any(documents):
            logger.warning(f"Key-phrase scorer got {len(documents)} chunks without tokens, idf stays 1")
            return self
        self.vectorizer = TfidfVectorizer(analyzer=pretokenized, smooth_idf=True, norm=None).fit(documents)
        self.num_documents = len(documents)
        logger.info(f"Key-phrase scorer fitted on {self.num_documents} chunks, "
                    f"{len(self.vectorizer.vocabulary_)} terms")
        return self

    def idf(self, token: str) -> float:
        if self.vectorizer is None:
            return 1.0
        index = self.vectorizer.vocabulary_.get(token)
        if index is None:
            # unseen term: smoothed idf at document frequency 0
            return float(np.log(1 + self.num_documents)) + 1.0
        return float(self.vectorizer.idf_[index])

    def token_weights(self, tokens: List[str]) -> Dict[str, float]:
        counts = Counter(tokens)
        return {token: count / len(tokens) * self.idf(token) for token, count in counts.items()}

    def extract(self, chunk: Chunk, chunk_index: int = 0) -> List[KeyPhrase]:
        tokens = chunk.source_tokens
        if not tokens:
            return []
        weights = self.token_weights(tokens)

        # candidate -> (raw score, first position)
        candidates: Dict[tuple, tuple] = {}
        for start in range(len(tokens)):
            for n in range(1, self.max_ngram + 1):
                gram = tuple(tokens[start:start + n])
                if len(gram) < n:
                    break
                if gram[-1] in self.stopwords:
                    break
                if gram in candidates:
                    continue
                candidates[gram] = (sum(weights[t] for t in gram), start)

        if not candidates:
            return []
        best = max(score for score, _ in candidates.values())
        ordered = sorted(candidates.items(), key=lambda item: (-item[1][0], item[1][1], len(item[0])))
        phrases = [KeyPhrase(tokens=list(gram), score=score / best) for gram, (score, _) in ordered]
        if self.top_k:
            phrases = phrases[:self.top_k]
        return phrases


class PrecomputedKeyPhraseScorer(KeyPhraseScorer):
    """Serves key-phrases computed elsewhere, indexed by chunk"""

    def __init__(self, phrases_by_chunk: Dict[int, List[KeyPhrase]], name: str = "Precomputed Key-phrases"):
        super().__init__(name)
        self.phrases_by_chunk = phrases_by_chunk

    def extract(self, chunk: Chunk, chunk_index: int = 0) -> List[KeyPhrase]:
        phrases = self.phrases_by_chunk.get(chunk_index)
        if phrases is None:
            logger.warning(f"No key-phrases for chunk {chunk_index} ({self.name})")
            return []
        return [KeyPhrase(tokens=list(p.tokens), score=p.score) for p in phrases]


class FileKeyPhraseScorer(PrecomputedKeyPhraseScorer):
    """Key-phrases from a JSON-lines file, served unchanged"""

    def __init__(self, path: str):
        super().__init__(load_keyphrase_file(path), f"Key-phrase File {path}")
        self.path = path


class UnscoredKeyPhraseScorer(KeyPhraseScorer):
    """Keeps another scorer's phrases but discards their importance scores"""

    def __init__(self, inner: KeyPhraseScorer):
        super().__init__(f"Unscored {inner.name}")
        self.inner = inner

    def extract(self, chunk: Chunk, chunk_index: int = 0) -> List[KeyPhrase]:
        return [KeyPhrase(tokens=p.tokens, score=1.0) for p in self.inner.extract(chunk, chunk_index)]


def load_keyphrase_file(path: str) -> Dict[int, List[KeyPhrase]]:
    """Parse {"chunk_index": int, "phrase": str, "score": float} lines"""
    phrases: Dict[int, List[KeyPhrase]] = {}
    with open(path, 'r', encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetFormatError(path, line_number, '<record>', f"invalid JSON ({e.msg})")
            if not isinstance(obj, dict):
                raise DatasetFormatError(path, line_number, '<record>', 'record is not a JSON object')
            for field_name, kind in (('chunk_index', int), ('phrase', str), ('score', (int, float))):
                if not isinstance(obj.get(field_name), kind) or isinstance(obj.get(field_name), bool):
                    raise DatasetFormatError(path, line_number, field_name, 'missing or wrong type')
            try:
                phrase = KeyPhrase(tokens=obj['phrase'].split(), score=float(obj['score']))
            except ValueError as e:
                raise DatasetFormatError(path, line_number, 'phrase' if 'token' in str(e) else 'score', str(e))
            phrases.setdefault(obj['chunk_index'], []).append(phrase)
    logger.info(f"Loaded key-phrases for {len(phrases)} chunks from {path}")
    return phrases


def write_keyphrase_file(path: str, phrases_by_chunk: Dict[int, List[KeyPhrase]]):
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for chunk_index in sorted(phrases_by_chunk):
            for phrase in phrases_by_chunk[chunk_index]:
                f.write(json.dumps({'chunk_index': chunk_index, 'phrase': ' '.join(phrase.tokens),
                                    'score': phrase.score}, ensure_ascii=False) + '\n')


def extract_keyphrases(chunk: Chunk, scorer: KeyPhraseScorer, chunk_index: int = 0) -> List[KeyPhrase]:
    if not chunk.source_tokens:
        return []
    return scorer.extract(chunk, chunk_index)


def phrase_word_probs(kp: KeyPhrase) -> Dict[str, float]:
    """P(word | phrase) as within-phrase relative frequency"""
    counts = Counter(kp.tokens)
    return {token: count / len(kp.tokens) for token, count in counts.items()}


def build_keyphrase_vector(keyphrases: List[KeyPhrase], vocab: Vocabulary) -> KeyphraseVector:
    """gamma = sum_i score_i * P(. | phrase_i), over in-vocabulary words only"""
    gamma = np.zeros(vocab.size, dtype=np.float64)
    for kp in keyphrases:
        for token, prob in phrase_word_probs(kp).items():
            if token in RESERVED_TOKENS:
                continue
            token_id = vocab.id_of(token)
            if token_id != UNK_ID:
                gamma[token_id] += kp.score * prob
    return KeyphraseVector(gamma=gamma)


def reduce_keyphrase_vector(gamma: KeyphraseVector, encoding: ExtendedEncoding) -> ReducedKeyphraseVector:
    """Project gamma onto source positions; OOV positions get 0"""
    base_ids = np.asarray(encoding.base_ids, dtype=np.int64)
    gamma_bar = np.where(base_ids == UNK_ID, 0.0, gamma.gamma[base_ids]) if len(base_ids) else np.zeros(0)
    return ReducedKeyphraseVector(gamma_bar=gamma_bar.astype(np.float64))


def keyphrase_vector_for(chunk: Chunk, encoding: ExtendedEncoding, vocab: Vocabulary,
                         scorer: KeyPhraseScorer, chunk_index: int = 0) -> ReducedKeyphraseVector:
    """Key-phrases -> gamma -> gamma_bar for one chunk"""
    keyphrases = extract_keyphrases(chunk, scorer, chunk_index)
    logger.debug(f"Chunk {chunk_index}: {len(keyphrases)} key-phrases")
    return reduce_keyphrase_vector(build_keyphrase_vector(keyphrases, vocab), encoding)


def make_scorer(chunks: Iterable[Chunk], stopwords: Iterable[str] = (), keyphrase_file: Optional[str] = None,
                top_k: Optional[int] = None, ignore_scores: bool = False) -> KeyPhraseScorer:
    """Key-phrase file when given, otherwise TF-IDF fitted on `chunks`"""
    if keyphrase_file:
        scorer: KeyPhraseScorer = FileKeyPhraseScorer(keyphrase_file)
    else:
        scorer = TfidfKeyPhraseScorer(stopwords, top_k=top_k).fit(chunks)
    if ignore_scores:
        scorer = UnscoredKeyPhraseScorer(scorer)
    logger.info(f"Key-phrase scorer: {scorer.name}")
    return scorer
