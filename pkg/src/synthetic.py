"""
Synthetic data for smoke runs and tests: a disaster-tweet stream, a copy task
with out-of-vocabulary tokens, and toy-sized models.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from corpus import Chunk, RawTweet, MAX_REFERENCE_TOKENS
from vocab import Vocabulary, RESERVED_TOKENS
from keyphrase import KeyPhrase
from model import KeyphrasePointerGenerator, ModelConfig, PreparedExample, prepare_example

logger = logging.getLogger(__name__)

EVENT_WORDS = [
    'flood', 'rescue', 'shelter', 'bridge', 'water', 'damage', 'relief', 'volunteers', 'evacuation',
    'rain', 'river', 'roads', 'power', 'outage', 'medical', 'teams', 'families', 'houses', 'collapsed',
    'district', 'helpline', 'donate', 'food', 'supplies', 'injured', 'missing', 'army', 'boats', 'villages',
]
PLACES = ['chennai', 'kerala', 'assam', 'patna', 'guwahati', 'kochi']
TWEET_TEMPLATES = [
    "{w0} {w1} in {place} after heavy {w2} #floods",
    "@ndrf {w0} teams reach {place}, {w1} and {w2} needed now http://t.co/x{n}",
    "Breaking: {w0} {w1} near {place} :( {w2} on the way",
    "Please share! {w0} helpline for {place} {w1} {w2} https://relief.org/{n}",
    "{w0} and {w1} reported from {place} district, {w2} continues",
]

CONTENT_WORDS = ['alpha', 'bravo', 'charlie', 'delta', 'echo', 'foxtrot']
FILLER_WORDS = ['filler', 'noise', 'blah', 'static']


@dataclass
class CopyTask:
    chunks: List[Chunk]
    vocab: Vocabulary
    keyphrases: Dict[int, List[KeyPhrase]]


def synthetic_tweets(n: int = 50, seed: int = 0) -> List[RawTweet]:
    """Template tweets with URLs, mentions, hashtags and emoticons mixed in"""
    rng = np.random.default_rng(seed)
    tweets = []
    for i in range(n):
        template = TWEET_TEMPLATES[int(rng.integers(len(TWEET_TEMPLATES)))]
        words = rng.choice(EVENT_WORDS, size=3, replace=False)
        text = template.format(w0=words[0], w1=words[1], w2=words[2],
                               place=PLACES[int(rng.integers(len(PLACES)))], n=i)
        tweets.append(RawTweet(id=f"t{i:03d}", text=text, timestamp=1_500_000_000 + 60 * i))
    return tweets


def lead_reference(chunk: Chunk, length: int = 40) -> List[str]:
    """Reference summary made of the chunk's first distinct tokens"""
    seen = []
    for token in chunk.source_tokens:
        if token not in seen:
            seen.append(token)
        if len(seen) == min(length, MAX_REFERENCE_TOKENS):
            break
    return seen


def copy_task(n_pairs: int = 20, n_content: int = 3, n_filler: int = 4, seed: int = 0) -> CopyTask:
    """
    Each source mixes content words, filler words and one pair-specific OOV
    token; the target is the content words and the OOV in source order.
    Target tokens double as key-phrases with score 1.0.
    """
    rng = np.random.default_rng(seed)
    vocab = Vocabulary(RESERVED_TOKENS + tuple(CONTENT_WORDS) + tuple(FILLER_WORDS))
    chunks = []
    keyphrases = {}
    for i in range(n_pairs):
        content = list(rng.choice(CONTENT_WORDS, size=n_content, replace=False)) + [f"unseen{i:03d}"]
        filler = list(rng.choice(FILLER_WORDS, size=n_filler, replace=True))
        source = content + filler
        order = rng.permutation(len(source))
        source = [str(source[k]) for k in order]
        target = [t for t in source if t not in FILLER_WORDS]
        chunks.append(Chunk(source_tokens=source, reference_tokens=target, origin_ids=[str(i)]))
        keyphrases[i] = [KeyPhrase(tokens=[t], score=1.0) for t in dict.fromkeys(target)]
    return CopyTask(chunks=chunks, vocab=vocab, keyphrases=keyphrases)


def toy_vocab(size: int = 20) -> Vocabulary:
    """Reserved tokens plus tok00, tok01, ... up to `size` entries"""
    return Vocabulary(RESERVED_TOKENS + tuple(f"tok{i:02d}" for i in range(size - len(RESERVED_TOKENS))))


def toy_model(vocab_size: int = 20, hidden_dim: int = 8, embed_dim: int = 4, seed: int = 0,
              dtype: str = 'float64', **overrides) -> KeyphrasePointerGenerator:
    config = ModelConfig(hidden_dim=hidden_dim, embed_dim=embed_dim, vocab_size=vocab_size, dtype=dtype,
                         max_source_len=50, max_target_len=50, **overrides)
    return KeyphrasePointerGenerator.initialize(config, seed)


def toy_chunk(vocab: Vocabulary, source_len: int = 5, target_len: int = 4, n_oov: int = 1,
              seed: int = 0) -> Chunk:
    """Random chunk whose source carries n_oov OOV tokens, each also used in the target"""
    rng = np.random.default_rng(seed)
    words = vocab.tokens[len(RESERVED_TOKENS):]
    source = [str(w) for w in rng.choice(words, size=source_len - n_oov)]
    oovs = [f"zz{seed}oov{k}" for k in range(n_oov)]
    for oov in oovs:
        source.insert(int(rng.integers(len(source) + 1)), oov)
    target = [str(w) for w in rng.choice(words, size=max(target_len - n_oov, 0))] + oovs
    target = [target[k] for k in rng.permutation(len(target))][:target_len]
    return Chunk(source_tokens=source, reference_tokens=target)


def toy_example(model: KeyphrasePointerGenerator, vocab: Vocabulary, source_len: int = 5, target_len: int = 4,
                seed: int = 0, gamma_bar: Optional[np.ndarray] = None) -> Tuple[Chunk, PreparedExample]:
    chunk = toy_chunk(vocab, source_len, target_len, seed=seed)
    if gamma_bar is None:
        gamma_bar = np.random.default_rng(seed + 1).uniform(0.0, 1.0, size=source_len)
    return chunk, prepare_example(chunk, vocab, model.config, gamma_bar)
