import os
import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from corpus import Chunk
from vocab import Vocabulary
from keyphrase import KeyPhraseScorer
from model import KeyphrasePointerGenerator, ModelConfig
from train import TrainConfig, Trainer, build_examples
from decode import DecodeConfig
from summarizer import Summarizer
from evaluation import evaluate_dataset

logger = logging.getLogger(__name__)

# w1 = 1.0 is the plain pointer-generator
SWEEP_WEIGHTS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
SWEEP_FRACTIONS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
SWEEP_BATCH_SIZES = (8, 16, 32, 64, 128)
SWEEP_LEARNING_RATES = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30)
SWEEP_ITERATIONS = (30000, 60000, 90000, 120000, 150000)


@dataclass(frozen=True)
class SweepAxis:
    name: str
    defaults: Tuple
    integer: bool = False

    def parse(self, text: str) -> List:
        """Comma-separated values for this axis"""
        cast = int if self.integer else float
        values = [cast(v) for v in text.split(',') if v.strip()]
        if not values:
            raise ValueError(f"No values given for the {self.name} sweep")
        return values


SWEEP_AXES: Dict[str, SweepAxis] = {
    'w1': SweepAxis('w1', SWEEP_WEIGHTS),
    'fraction': SweepAxis('fraction', SWEEP_FRACTIONS),
    'batch_size': SweepAxis('batch_size', SWEEP_BATCH_SIZES, integer=True),
    'learning_rate': SweepAxis('learning_rate', SWEEP_LEARNING_RATES),
    'iterations': SweepAxis('iterations', SWEEP_ITERATIONS, integer=True),
}


def training_subset(chunks: List[Chunk], fraction: float, seed: int = 0) -> List[Chunk]:
    """
    Seeded random share of the training chunks, in their original order.
    Smaller fractions are prefixes of the same permutation, so subsets nest.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"Training fraction must lie in (0, 1], got {fraction}")
    count = max(1, int(round(fraction * len(chunks))))
    order = np.random.default_rng(seed).permutation(len(chunks))
    return [chunks[i] for i in sorted(order[:count])]


def apply_axis(axis: str, value, model_config: ModelConfig, train_config: TrainConfig,
               train_chunks: List[Chunk]) -> Tuple[ModelConfig, TrainConfig, List[Chunk]]:
    """Configuration and training chunks of one sweep point"""
    if axis == 'w1':
        model_config = replace(model_config, w1=float(value), w2=round(1.0 - float(value), 12))
    elif axis == 'fraction':
        train_chunks = training_subset(train_chunks, float(value), train_config.seed)
    elif axis == 'batch_size':
        train_config = replace(train_config, batch_size=int(value))
    elif axis == 'learning_rate':
        train_config = replace(train_config, learning_rate=float(value))
    elif axis == 'iterations':
        train_config = replace(train_config, max_iterations=int(value))
    else:
        raise ValueError(f"Unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
    return model_config.validate(), train_config.validate(), train_chunks


def run_sweep(axis: str, values: Sequence, train_chunks: List[Chunk], eval_chunks: List[Chunk], vocab: Vocabulary,
              scorer: Optional[KeyPhraseScorer], model_config: ModelConfig, train_config: TrainConfig,
              decode_config: DecodeConfig, checkpoint_root: Optional[str] = None) -> pd.DataFrame:
    """Train one model per value of `axis`, decode the evaluation chunks and score them"""
    if axis not in SWEEP_AXES:
        raise ValueError(f"Unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
    missing = [i for i, c in enumerate(eval_chunks) if c.reference_tokens is None]
    if missing:
        raise ValueError(f"Evaluation chunk {missing[0]} has no reference summary")

    rows = []
    for value in values:
        config, run_train_config, chunks = apply_axis(axis, value, replace(model_config, vocab_size=vocab.size),
                                                      train_config, train_chunks)
        logger.info(f"Sweep: training with {axis}={value} on {len(chunks)} chunks")
        model = KeyphrasePointerGenerator.initialize(config, run_train_config.seed)
        run_scorer = scorer if config.keyphrase_attention else None

        checkpoint_dir = os.path.join(checkpoint_root, f"{axis}_{value}") if checkpoint_root else None
        trainer = Trainer(model, build_examples(chunks, vocab, config, run_scorer), run_train_config, checkpoint_dir)
        history = trainer.train()

        results = Summarizer(model, vocab, scorer=run_scorer, decode_config=decode_config).summarize_dataset(eval_chunks)
        means, _ = evaluate_dataset([(r.tokens, c.reference_tokens) for r, c in zip(results, eval_chunks)])
        rows.append({
            axis: value,
            'w1': config.w1,
            'w2': config.w2,
            'train_chunks': len(chunks),
            'batch_size': run_train_config.batch_size,
            'learning_rate': run_train_config.learning_rate,
            'iterations': run_train_config.max_iterations,
            'final_loss': history[-1]['loss'] if history else float('nan'),
            'r1_f1': means['r1'].f1,
            'r2_f1': means['r2'].f1,
            'rl_f1': means['rl'].f1,
        })
        logger.info(f"Sweep: {axis}={value} -> R-1 F1 {means['r1'].f1:.4f}")

    return pd.DataFrame(rows)
