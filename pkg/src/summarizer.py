import logging
from typing import Iterable, List, Optional, Sequence

from corpus import Chunk, RawTweet, MAX_SOURCE_TOKENS, preprocess_corpus
from vocab import Vocabulary, encode_extended
from keyphrase import KeyPhraseScorer, keyphrase_vector_for
from extract import Ranker, TfidfRanker, rank_tweets, select_until_budget
from model import KeyphrasePointerGenerator
from decode import DecodeConfig, DecodeResult, beam_search

logger = logging.getLogger(__name__)


class Summarizer:
    """
    Two-phase pipeline: rank and select tweets up to the source budget, then
    generate an abstractive summary of the selection with beam search.
    """

    def __init__(self, model: KeyphrasePointerGenerator, vocab: Vocabulary, stopwords: Iterable[str] = (),
                 ranker: Optional[Ranker] = None, scorer: Optional[KeyPhraseScorer] = None,
                 decode_config: Optional[DecodeConfig] = None, budget: int = MAX_SOURCE_TOKENS):
        if vocab.size != model.config.vocab_size:
            raise ValueError(f"Vocabulary has {vocab.size} tokens, model expects {model.config.vocab_size}")
        self.model = model
        self.vocab = vocab
        self.stopwords = frozenset(stopwords)
        self.ranker = ranker or TfidfRanker(self.stopwords)
        self.scorer = scorer
        self.decode_config = (decode_config or DecodeConfig()).validate()
        self.budget = min(budget, model.config.max_source_len)

        logger.info(f"Summarizer ready: ranker '{self.ranker.name}', beam {self.decode_config.beam_size}, "
                    f"key-phrases at decode {'on' if self.decode_config.keyphrase_at_decode else 'off'}")

    def select(self, raw_tweets: Sequence[RawTweet]) -> Chunk:
        """Phase I: preprocess, rank, keep the top tweets that fit the budget"""
        tweets, ids = preprocess_corpus(raw_tweets, self.stopwords)
        if not tweets:
            raise ValueError("no input after preprocessing")
        return select_until_budget(rank_tweets(tweets, self.ranker, ids), self.budget)

    def summarize_chunk(self, chunk: Chunk, chunk_index: int = 0) -> DecodeResult:
        """Phase II on an already selected chunk"""
        source = chunk.source_tokens[:self.model.config.max_source_len]
        if not source:
            raise ValueError(f"Chunk {chunk_index} has an empty source")
        truncated = Chunk(source_tokens=source, origin_ids=chunk.origin_ids)
        encoding = encode_extended(source, self.vocab)

        gamma_bar = None
        if self.scorer is not None and self.decode_config.keyphrase_at_decode:
            gamma_bar = keyphrase_vector_for(truncated, encoding, self.vocab, self.scorer, chunk_index).gamma_bar

        result = beam_search(self.model, truncated, encoding, self.decode_config, self.vocab, gamma_bar)
        logger.info(f"Chunk {chunk_index}: {len(result.tokens)}-token summary, log prob {result.log_prob:.3f}")
        return result

    def summarize(self, raw_tweets: Sequence[RawTweet]) -> str:
        chunk = self.select(raw_tweets)
        if not chunk.source_tokens:
            raise ValueError("no input after preprocessing")
        return self.summarize_chunk(chunk).text

    def summarize_dataset(self, chunks: List[Chunk]) -> List[DecodeResult]:
        return [self.summarize_chunk(chunk, i) for i, chunk in enumerate(chunks)]


def summarize(model: KeyphrasePointerGenerator, vocab: Vocabulary, raw_tweets: Sequence[RawTweet],
              stopwords: Iterable[str] = (), ranker: Optional[Ranker] = None,
              scorer: Optional[KeyPhraseScorer] = None, config: Optional[DecodeConfig] = None) -> str:
    """Raw tweets in, single-spaced summary text out"""
    return Summarizer(model, vocab, stopwords, ranker, scorer, config).summarize(raw_tweets)
