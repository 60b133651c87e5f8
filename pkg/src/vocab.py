import os
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence

logger = logging.getLogger(__name__)

PAD_TOKEN = '[PAD]'
UNK_TOKEN = '[UNK]'
START_TOKEN = '[START]'
STOP_TOKEN = '[STOP]'
RESERVED_TOKENS = (PAD_TOKEN, UNK_TOKEN, START_TOKEN, STOP_TOKEN)

PAD_ID, UNK_ID, START_ID, STOP_ID = 0, 1, 2, 3

DEFAULT_MAX_SIZE = 50000
VOCAB_HEADER = 'auxsumm-vocab v1'


class VocabularyError(ValueError):
    """Raised for out-of-range ids or malformed vocabulary files"""


class Vocabulary:
    """
    Fixed token <-> id map. Ids 0-3 are reserved (PAD, UNK, START, STOP);
    the remaining ids follow frequency order. Immutable once built.
    """

    def __init__(self, tokens: Sequence[str]):
        tokens = tuple(tokens)
        if tokens[:len(RESERVED_TOKENS)] != RESERVED_TOKENS:
            raise VocabularyError(f"Vocabulary must start with the reserved tokens {RESERVED_TOKENS}")
        if len(set(tokens)) != len(tokens):
            raise VocabularyError("Vocabulary contains duplicate tokens")
        self._token_of = tokens
        self._id_of = {token: i for i, token in enumerate(tokens)}

    @property
    def size(self) -> int:
        return len(self._token_of)

    def __len__(self) -> int:
        return len(self._token_of)

    def __contains__(self, token: str) -> bool:
        return token in self._id_of

    def id_of(self, token: str) -> int:
        """Id of a token, UNK for anything outside the vocabulary"""
        return self._id_of.get(token, UNK_ID)

    def token_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self._token_of):
            raise VocabularyError(f"Id {token_id} outside vocabulary of size {self.size}")
        return self._token_of[token_id]

    @property
    def tokens(self) -> List[str]:
        return list(self._token_of)

    def save(self, path: str):
        """Write the header line then one token per line in id order"""
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(f"{VOCAB_HEADER} {self.size}\n")
            for token in self._token_of:
                f.write(token + '\n')
        logger.info(f"Vocabulary of {self.size} tokens saved to {path}")

    @classmethod
    def load(cls, path: str) -> 'Vocabulary':
        with open(path, 'r', encoding='utf-8') as f:
            header = f.readline().rstrip('\n')
            parts = header.rsplit(' ', 1)
            if len(parts) != 2 or parts[0] != VOCAB_HEADER or not parts[1].isdigit():
                raise VocabularyError(f"{path}: bad header line '{header}'")
            expected = int(parts[1])
            tokens = [line.rstrip('\n') for line in f]
        if len(tokens) != expected:
            raise VocabularyError(f"{path}: header announces {expected} tokens, file holds {len(tokens)}")
        vocab = cls(tokens)
        logger.info(f"Loaded vocabulary of {vocab.size} tokens from {path}")
        return vocab


@dataclass
class ExtendedEncoding:
    base_ids: List[int]
    extended_ids: List[int]
    oov_tokens: List[str]

    def extended_size(self, vocab: 'Vocabulary') -> int:
        return vocab.size + len(self.oov_tokens)


def build_vocab(chunks: Iterable, max_size: int = DEFAULT_MAX_SIZE) -> Vocabulary:
    """Keep the max_size most frequent source/reference tokens, ties broken lexicographically"""
    if max_size <= 0:
        raise ValueError(f"max_size must be positive, got {max_size}")

    counts = Counter()
    for chunk in chunks:
        counts.update(chunk.source_tokens)
        if chunk.reference_tokens:
            counts.update(chunk.reference_tokens)
    for token in RESERVED_TOKENS:
        counts.pop(token, None)

    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    kept = [token for token, _ in ranked[:max_size]]
    vocab = Vocabulary(RESERVED_TOKENS + tuple(kept))

    logger.info(f"Built vocabulary: {len(kept)} of {len(counts)} distinct tokens kept (+{len(RESERVED_TOKENS)} reserved)")
    return vocab


def encode_extended(tokens: Sequence[str], vocab: Vocabulary) -> ExtendedEncoding:
    """Map tokens to base ids and to extended ids where source OOVs get temporary ids"""
    base_ids = []
    extended_ids = []
    oov_tokens: List[str] = []
    oov_index: Dict[str, int] = {}

    for token in tokens:
        token_id = vocab.id_of(token)
        base_ids.append(token_id)
        if token_id == UNK_ID and token != UNK_TOKEN:
            if token not in oov_index:
                oov_index[token] = vocab.size + len(oov_tokens)
                oov_tokens.append(token)
            extended_ids.append(oov_index[token])
        else:
            extended_ids.append(token_id)

    return ExtendedEncoding(base_ids=base_ids, extended_ids=extended_ids, oov_tokens=oov_tokens)


def encode_target(tokens: Sequence[str], vocab: Vocabulary, oov_tokens: Sequence[str]) -> List[int]:
    """Extended ids for a target sequence: source OOVs keep their copy ids, other OOVs become UNK"""
    oov_index = {token: vocab.size + i for i, token in enumerate(oov_tokens)}
    ids = []
    for token in tokens:
        token_id = vocab.id_of(token)
        if token_id == UNK_ID and token in oov_index:
            token_id = oov_index[token]
        ids.append(token_id)
    return ids


def decode_ids(extended_ids: Sequence[int], vocab: Vocabulary, oov_tokens: Sequence[str]) -> List[str]:
    """Inverse of encode_extended at the token level"""
    limit = vocab.size + len(oov_tokens)
    tokens = []
    for token_id in extended_ids:
        token_id = int(token_id)
        if not 0 <= token_id < limit:
            raise VocabularyError(f"Id {token_id} outside extended vocabulary of size {limit}")
        if token_id < vocab.size:
            tokens.append(vocab.token_of(token_id))
        else:
            tokens.append(oov_tokens[token_id - vocab.size])
    return tokens
