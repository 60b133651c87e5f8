import os
import re
import json
import logging
import unicodedata
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence

import pandas as pd

logger = logging.getLogger(__name__)

MAX_SOURCE_TOKENS = 400
MAX_REFERENCE_TOKENS = 200
MIN_TOKEN_CHARS = 3

URL_PATTERN = re.compile(r'(?:https?://|www\.)\S+', re.IGNORECASE)
# Hashtags and usernames at any word start, including right after punctuation
MARKER_PATTERN = re.compile(r'(?<!\w)[#@]\w+')

# Matched against lowercased whitespace tokens, before punctuation stripping
EMOTICONS = frozenset([
    ':)', ':-)', ':(', ':-(', ':d', ':-d', ';)', ';-)', ':p', ':-p', ';p',
    ':/', ':-/', ':\\', ":'(", ":')", ':o', ':-o', ':*', ':-*', ':|', ':-|',
    '<3', '</3', 'xd', 'x-d', '^_^', '^^', '-_-', 'o_o', 'o.o', ':]', ':[',
    '=)', '=(', '=d', '8)', 'b)', ':3', '>:(', 'd:', ':$', ':@',
])

DEFAULT_STOPWORDS_PATH = os.path.join(
    os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'data', 'stopwords_en.txt'
)


class DatasetFormatError(ValueError):
    """Raised when a dataset record cannot be parsed"""

    def __init__(self, path: str, line_number: int, field_name: str, reason: str):
        self.path = path
        self.line_number = line_number
        self.field_name = field_name
        super().__init__(f"{path}:{line_number}: field '{field_name}': {reason}")


@dataclass
class RawTweet:
    id: str
    text: str
    timestamp: Optional[int] = None


@dataclass
class Chunk:
    """
    One training/inference sample: a fixed-budget window of source tokens,
    optionally paired with a reference summary.
    """
    source_tokens: List[str]
    reference_tokens: Optional[List[str]] = None
    origin_ids: List[str] = field(default_factory=list)

    def __post_init__(self):
        if len(self.source_tokens) > MAX_SOURCE_TOKENS:
            raise ValueError(f"Chunk source has {len(self.source_tokens)} tokens, limit is {MAX_SOURCE_TOKENS}")
        if self.reference_tokens is not None and len(self.reference_tokens) > MAX_REFERENCE_TOKENS:
            raise ValueError(f"Chunk reference has {len(self.reference_tokens)} tokens, limit is {MAX_REFERENCE_TOKENS}")

    @property
    def has_reference(self) -> bool:
        return self.reference_tokens is not None


def load_stopwords(path: Optional[str] = None) -> FrozenSet[str]:
    """Load a stopword list: one word per line, '#' starts a comment"""
    path = path or DEFAULT_STOPWORDS_PATH
    words = set()
    with open(path, 'r', encoding='utf-8') as f:
        for line in f:
            word = line.split('#', 1)[0].strip().lower()
            if word:
                words.add(word)
    logger.debug(f"Loaded {len(words)} stopwords from {path}")
    return frozenset(words)


def pretokenized(tokens: Sequence[str]) -> Sequence[str]:
    """Analyzer for vectorizers fed already-preprocessed token lists"""
    return tokens


def _strip_token(token: str) -> str:
    # Drops punctuation, symbols and anything outside the basic multilingual plane
    kept = []
    for ch in token:
        if ord(ch) > 0xFFFF:
            continue
        category = unicodedata.category(ch)
        if category[0] in ('P', 'S', 'C', 'Z'):
            continue
        kept.append(ch)
    return ''.join(kept)


def preprocess_tweet(raw: RawTweet, stopwords: Iterable[str]) -> List[str]:
    """
    Lowercase a tweet and drop URLs, emoticons, punctuation, stopwords,
    hashtag and username tokens, and tokens shorter than three characters.
    """
    stopwords = stopwords if isinstance(stopwords, (set, frozenset)) else set(stopwords)
    text = URL_PATTERN.sub(' ', raw.text.lower())
    text = MARKER_PATTERN.sub(' ', text)

    tokens = []
    for token in text.split():
        if token.startswith('#') or token.startswith('@'):
            continue
        if token in EMOTICONS:
            continue
        token = _strip_token(token)
        if len(token) < MIN_TOKEN_CHARS or token in stopwords:
            continue
        tokens.append(token)
    return tokens


def chunk_corpus(tweets: Sequence[Sequence[str]], budget: int = MAX_SOURCE_TOKENS,
                 tweet_ids: Optional[Sequence[str]] = None) -> List[Chunk]:
    """Concatenate tweet token streams in order and cut consecutive chunks of `budget` tokens"""
    if budget <= 0:
        raise ValueError(f"Chunk budget must be positive, got {budget}")
    if budget > MAX_SOURCE_TOKENS:
        raise ValueError(f"Chunk budget {budget} exceeds the {MAX_SOURCE_TOKENS}-token sample size")
    if tweet_ids is None:
        tweet_ids = [str(i) for i in range(len(tweets))]
    elif len(tweet_ids) != len(tweets):
        raise ValueError(f"Got {len(tweet_ids)} tweet ids for {len(tweets)} tweets")

    chunks = []
    current_tokens: List[str] = []
    current_ids: List[str] = []
    for tweet_id, tokens in zip(tweet_ids, tweets):
        position = 0
        while position < len(tokens):
            take = min(budget - len(current_tokens), len(tokens) - position)
            current_tokens.extend(tokens[position:position + take])
            if not current_ids or current_ids[-1] != tweet_id:
                current_ids.append(tweet_id)
            position += take
            if len(current_tokens) == budget:
                chunks.append(Chunk(source_tokens=current_tokens, origin_ids=current_ids))
                current_tokens, current_ids = [], []

    if current_tokens:
        chunks.append(Chunk(source_tokens=current_tokens, origin_ids=current_ids))

    logger.info(f"Cut {sum(len(t) for t in tweets)} tokens from {len(tweets)} tweets into {len(chunks)} chunks of <= {budget}")
    return chunks


def pair_references(chunks: List[Chunk], references: List[List[str]]) -> List[Chunk]:
    """Attach the i-th reference token list to the i-th chunk"""
    if len(chunks) != len(references):
        raise ValueError(f"Got {len(references)} references for {len(chunks)} chunks")

    paired = []
    for index, (chunk, reference) in enumerate(zip(chunks, references)):
        if len(reference) > MAX_REFERENCE_TOKENS:
            logger.warning(f"Reference {index} has {len(reference)} tokens, truncating to {MAX_REFERENCE_TOKENS}")
            reference = reference[:MAX_REFERENCE_TOKENS]
        paired.append(Chunk(source_tokens=list(chunk.source_tokens),
                            reference_tokens=list(reference),
                            origin_ids=list(chunk.origin_ids)))
    return paired


def load_raw_tweets(path: str) -> List[RawTweet]:
    """Load tweets from a CSV (id,text[,timestamp]) or JSON-lines file"""
    if not os.path.exists(path):
        raise FileNotFoundError(f"Tweet file {path} does not exist")

    records: List[Dict] = []
    if path.lower().endswith('.csv'):
        df = pd.read_csv(path, dtype={'id': str, 'text': str}, keep_default_na=False)
        if 'text' not in df.columns:
            raise DatasetFormatError(path, 1, 'text', "CSV file must contain a 'text' column")
        if 'id' not in df.columns:
            df['id'] = [str(i) for i in range(len(df))]
        for row in df.to_dict('records'):
            timestamp = row.get('timestamp')
            records.append({'id': row['id'], 'text': row['text'],
                            'timestamp': int(timestamp) if timestamp not in (None, '') else None})
    else:
        with open(path, 'r', encoding='utf-8') as f:
            for line_number, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as e:
                    raise DatasetFormatError(path, line_number, '<record>', f"invalid JSON ({e.msg})")
                if not isinstance(obj.get('text'), str):
                    raise DatasetFormatError(path, line_number, 'text', 'missing or not a string')
                records.append({'id': str(obj.get('id', line_number - 1)), 'text': obj['text'],
                                'timestamp': obj.get('timestamp')})

    tweets = []
    for record in records:
        if not record['text'].strip():
            logger.warning(f"Skipping tweet {record['id']}: empty text")
            continue
        tweets.append(RawTweet(id=record['id'], text=record['text'], timestamp=record['timestamp']))

    logger.info(f"Loaded {len(tweets)} tweets from {path}")
    return tweets


def preprocess_corpus(raw_tweets: Sequence[RawTweet], stopwords: Iterable[str]):
    """Preprocess every tweet, dropping the ones left empty; returns (token lists, tweet ids)"""
    stopwords = frozenset(stopwords)
    tweets: List[List[str]] = []
    ids: List[str] = []
    for raw in raw_tweets:
        tokens = preprocess_tweet(raw, stopwords)
        if tokens:
            tweets.append(tokens)
            ids.append(raw.id)
    dropped = len(raw_tweets) - len(tweets)
    if dropped:
        logger.info(f"{dropped} of {len(raw_tweets)} tweets empty after preprocessing")
    return tweets, ids


def load_references(path: str, stopwords: Iterable[str]) -> List[List[str]]:
    """One reference summary per line, preprocessed with the tweet rules"""
    stopwords = frozenset(stopwords)
    with open(path, 'r', encoding='utf-8') as f:
        lines = [line.rstrip('\n') for line in f]
    return [preprocess_tweet(RawTweet(id=str(i), text=line), stopwords) for i, line in enumerate(lines)]


def _chunk_to_record(chunk: Chunk) -> str:
    record = {'source': ' '.join(chunk.source_tokens)}
    if chunk.reference_tokens is not None:
        record['reference'] = ' '.join(chunk.reference_tokens)
    record['origin_ids'] = list(chunk.origin_ids)
    return json.dumps(record, ensure_ascii=False, separators=(', ', ': '))


def write_dataset(chunks: List[Chunk], path: str):
    """Write chunks as canonical JSON lines (UTF-8, LF)"""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for chunk in chunks:
            f.write(_chunk_to_record(chunk) + '\n')
    logger.info(f"Wrote {len(chunks)} chunks to {path}")


def _split_tokens(text: str) -> List[str]:
    return text.split(' ') if text else []


def load_dataset(path: str) -> List[Chunk]:
    """Load chunks written by write_dataset, validating every record"""
    chunks = []
    with open(path, 'r', encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            line = line.rstrip('\n')
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetFormatError(path, line_number, '<record>', f"invalid JSON ({e.msg})")
            if not isinstance(obj, dict):
                raise DatasetFormatError(path, line_number, '<record>', 'record is not a JSON object')

            if 'source' not in obj:
                raise DatasetFormatError(path, line_number, 'source', 'missing')
            if not isinstance(obj['source'], str):
                raise DatasetFormatError(path, line_number, 'source', 'not a string')

            reference = obj.get('reference')
            if reference is not None and not isinstance(reference, str):
                raise DatasetFormatError(path, line_number, 'reference', 'not a string')

            origin_ids = obj.get('origin_ids', [])
            if not isinstance(origin_ids, list) or not all(isinstance(i, str) for i in origin_ids):
                raise DatasetFormatError(path, line_number, 'origin_ids', 'not an array of strings')

            try:
                chunks.append(Chunk(
                    source_tokens=_split_tokens(obj['source']),
                    reference_tokens=_split_tokens(reference) if reference is not None else None,
                    origin_ids=origin_ids,
                ))
            except ValueError as e:
                field_name = 'reference' if 'reference' in str(e) else 'source'
                raise DatasetFormatError(path, line_number, field_name, str(e))

    logger.info(f"Loaded {len(chunks)} chunks from {path}")
    return chunks
