"""Self-check for the summarizer after model or pipeline changes.
Runs preprocess -> chunk -> train -> save/load -> summarize -> evaluate on synthetic
tweets with a tiny model, to ensure no exceptions and that the budgets hold.
"""
import os
import sys
import logging
import tempfile

# Ensure src is on path for direct module imports
PROJECT_ROOT = os.path.dirname(os.path.abspath(__file__))
SRC_PATH = os.path.join(PROJECT_ROOT, 'src')
if SRC_PATH not in sys.path:
    sys.path.insert(0, SRC_PATH)

from corpus import MAX_SOURCE_TOKENS, chunk_corpus, load_stopwords, pair_references, preprocess_corpus  # noqa: E402
from vocab import build_vocab  # noqa: E402
from keyphrase import make_scorer  # noqa: E402
from model import KeyphrasePointerGenerator, ModelConfig  # noqa: E402
from checkpoint import load_model  # noqa: E402
from train import TrainConfig, train  # noqa: E402
from decode import DecodeConfig  # noqa: E402
from summarizer import Summarizer  # noqa: E402
from evaluation import evaluate_dataset  # noqa: E402
from synthetic import lead_reference, synthetic_tweets  # noqa: E402

logger = logging.getLogger("self_check")


def run_self_check(iterations: int = 10) -> int:
    if not logging.getLogger().handlers:
        logging.basicConfig(level=logging.INFO)

    stopwords = load_stopwords()
    raw_tweets = synthetic_tweets(50, seed=0)
    tweets, ids = preprocess_corpus(raw_tweets, stopwords)
    chunks = chunk_corpus(tweets, budget=60, tweet_ids=ids)
    chunks = pair_references(chunks, [lead_reference(c, 12) for c in chunks])
    vocab = build_vocab(chunks)

    model = KeyphrasePointerGenerator.initialize(
        ModelConfig(hidden_dim=8, embed_dim=4, vocab_size=vocab.size), seed=0)
    scorer = make_scorer(chunks, stopwords)

    try:
        with tempfile.TemporaryDirectory() as workdir:
            history = train(chunks, vocab, model, TrainConfig(batch_size=2, max_iterations=iterations, log_every=5),
                            scorer=scorer, checkpoint_dir=workdir)
            logger.info(f"Trained {len(history)} iterations, last loss {history[-1]['loss']:.4f}")

            reloaded, metadata, _ = load_model(os.path.join(workdir, f"ckpt-{iterations:07d}.ckpt"))
            assert metadata['iteration'] == iterations, "checkpoint iteration mismatch"

        summarizer = Summarizer(reloaded, vocab, stopwords,
                                decode_config=DecodeConfig(beam_size=2, min_length=5, max_length=15))
        selected = summarizer.select(raw_tweets)
        assert len(selected.source_tokens) <= MAX_SOURCE_TOKENS, "Phase-I budget exceeded"
        result = summarizer.summarize_chunk(selected)
        assert 5 <= len(result.tokens) <= 15, f"summary length {len(result.tokens)} outside [5, 15]"

        means, _ = evaluate_dataset([(result.tokens, chunks[0].reference_tokens)])
        logger.info(f"Summary: {result.text}")
        logger.info(f"ROUGE-1 F1 against the first reference: {means['r1'].f1:.4f}")
        logger.info("Self-check completed without exceptions.")
        return 0
    except Exception as e:
        logger.exception("Self-check failed: %s", e)
        return 1


if __name__ == '__main__':
    exit(run_self_check())
