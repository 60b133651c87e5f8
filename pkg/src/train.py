import os
import glob
import math
import logging
from dataclasses import dataclass, asdict
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

import numerics as nx
from numerics import Graph, NonFiniteError
from corpus import Chunk
from vocab import Vocabulary, encode_extended
from keyphrase import KeyPhraseScorer, keyphrase_vector_for
from model import KeyphrasePointerGenerator, ModelConfig, PreparedExample, prepare_example
from checkpoint import save_model

logger = logging.getLogger(__name__)

ADAGRAD_EPSILON = 1e-10
METRICS_COLUMNS = ['iteration', 'loss', 'coverage_penalty']


class TrainingError(RuntimeError):
    """Raised when training cannot continue (e.g. a non-finite loss)"""


@dataclass
class TrainConfig:
    learning_rate: float = 0.15
    initial_accumulator: float = 0.1
    batch_size: int = 16
    max_iterations: int = 120000
    grad_clip_norm: float = 2.0
    seed: int = 0
    checkpoint_every: int = 1000
    log_every: int = 100
    coverage_start_iteration: int = 0

    def validate(self):
        for name in ('learning_rate', 'initial_accumulator', 'batch_size', 'max_iterations', 'checkpoint_every', 'log_every'):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.grad_clip_norm < 0:
            raise ValueError(f"grad_clip_norm must be >= 0 (0 disables clipping), got {self.grad_clip_norm}")
        if self.coverage_start_iteration < 0:
            raise ValueError(f"coverage_start_iteration must be >= 0, got {self.coverage_start_iteration}")
        return self


def adagrad_update(param: np.ndarray, grad: np.ndarray, accumulator: np.ndarray, lr: float,
                   eps: float = ADAGRAD_EPSILON) -> Tuple[np.ndarray, np.ndarray]:
    """acc += grad^2; param -= lr * grad / (sqrt(acc) + eps)"""
    if not (param.shape == grad.shape == accumulator.shape):
        raise nx.ShapeError('adagrad_update', param.shape, grad.shape, accumulator.shape)
    accumulator = accumulator + grad * grad
    param = param - lr * grad / (np.sqrt(accumulator) + eps)
    return param, accumulator


class AdagradOptimizer:
    """
    Adagrad with a per-parameter squared-gradient accumulator that starts
    at initial_accumulator.
    """

    def __init__(self, params: Dict[str, np.ndarray], lr: float = 0.15, initial_accumulator: float = 0.1,
                 accumulators: Optional[Dict[str, np.ndarray]] = None):
        self.lr = lr
        if accumulators:
            missing = sorted(set(params) - set(accumulators))
            if missing:
                raise ValueError(f"Missing accumulators for {missing}")
            self.accumulators = {name: np.array(accumulators[name], dtype=params[name].dtype) for name in params}
        else:
            self.accumulators = {name: np.full_like(p, initial_accumulator) for name, p in params.items()}

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]):
        """Update params in place, in sorted name order"""
        for name in sorted(params):
            param, acc = adagrad_update(params[name], grads[name], self.accumulators[name], self.lr)
            params[name][...] = param
            self.accumulators[name][...] = acc


def global_norm(grads: Dict[str, np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(np.square(grads[name], dtype=np.float64))) for name in sorted(grads)))


def clip_by_global_norm(grads: Dict[str, np.ndarray], max_norm: float) -> Tuple[Dict[str, np.ndarray], float]:
    """Rescale all gradients together so their joint L2 norm is at most max_norm"""
    norm = global_norm(grads)
    if max_norm <= 0 or norm <= max_norm:
        return grads, norm
    factor = max_norm / norm
    return {name: g * np.asarray(factor, dtype=g.dtype) for name, g in grads.items()}, norm


class MetricsLog:
    """Append-only CSV of (iteration, loss, coverage_penalty)"""

    def __init__(self, path: str, start_iteration: int = 0):
        self.path = path
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)

        if start_iteration == 0 or not os.path.exists(path):
            pd.DataFrame(columns=METRICS_COLUMNS).to_csv(path, index=False)
        else:
            # Resuming: drop rows written after the checkpoint we resume from
            df = pd.read_csv(path)
            df[df['iteration'] <= start_iteration].to_csv(path, index=False)

    def append(self, iteration: int, loss: float, coverage_penalty: float):
        pd.DataFrame([[iteration, loss, coverage_penalty]], columns=METRICS_COLUMNS).to_csv(
            self.path, mode='a', header=False, index=False)

    def read(self) -> pd.DataFrame:
        return pd.read_csv(self.path)


def build_examples(chunks: List[Chunk], vocab: Vocabulary, config: ModelConfig,
                   scorer: Optional[KeyPhraseScorer] = None) -> List[PreparedExample]:
    """Teacher-forcing examples with key-phrase vectors for every chunk"""
    examples = []
    for index, chunk in enumerate(chunks):
        truncated = Chunk(source_tokens=chunk.source_tokens[:config.max_source_len],
                          reference_tokens=chunk.reference_tokens, origin_ids=chunk.origin_ids)
        gamma_bar = None
        if scorer is not None and truncated.source_tokens:
            encoding = encode_extended(truncated.source_tokens, vocab)
            gamma_bar = keyphrase_vector_for(truncated, encoding, vocab, scorer, index).gamma_bar
        examples.append(prepare_example(truncated, vocab, config, gamma_bar))
    logger.info(f"Prepared {len(examples)} training examples")
    return examples


def latest_checkpoint(checkpoint_dir: str) -> Optional[str]:
    paths = sorted(glob.glob(os.path.join(checkpoint_dir, 'ckpt-*.ckpt')))
    return paths[-1] if paths else None


class Trainer:
    """
    Minibatch Adagrad training loop. Batches are a pure function of
    (seed, iteration), so a run resumed from a checkpoint follows the same
    trajectory as an uninterrupted one.
    """

    def __init__(self, model: KeyphrasePointerGenerator, examples: List[PreparedExample], config: TrainConfig,
                 checkpoint_dir: Optional[str] = None, metrics_path: Optional[str] = None,
                 start_iteration: int = 0, accumulators: Optional[Dict[str, np.ndarray]] = None):
        config.validate()
        if not examples:
            raise ValueError("Training set is empty")
        self.model = model
        self.examples = examples
        self.config = config
        self.checkpoint_dir = checkpoint_dir
        self.iteration = start_iteration
        self.optimizer = AdagradOptimizer(model.params, config.learning_rate, config.initial_accumulator, accumulators)
        if metrics_path is None and checkpoint_dir is not None:
            metrics_path = os.path.join(checkpoint_dir, 'metrics.csv')
        self.metrics = MetricsLog(metrics_path, start_iteration) if metrics_path else None
        self.steps_per_epoch = math.ceil(len(examples) / config.batch_size)

        logger.info(f"Trainer ready: {len(examples)} examples, batch size {config.batch_size}, "
                    f"{self.steps_per_epoch} batches per epoch, starting at iteration {start_iteration}")

    def batch_indices(self, iteration: int) -> List[int]:
        """Example indices of the 0-based iteration's minibatch"""
        epoch, position = divmod(iteration, self.steps_per_epoch)
        order = np.random.default_rng(self.config.seed + epoch).permutation(len(self.examples))
        start = position * self.config.batch_size
        return [int(i) for i in order[start:start + self.config.batch_size]]

    def lambda_cov_at(self, iteration: int) -> float:
        if iteration < self.config.coverage_start_iteration:
            return 0.0
        return self.model.config.lambda_cov

    def train_step(self, iteration: int) -> Tuple[float, float]:
        """One minibatch update; returns (batch loss, mean per-step coverage penalty)"""
        batch = self.batch_indices(iteration)
        lambda_cov = self.lambda_cov_at(iteration)
        try:
            graph = Graph(self.model.dtype)
            p = self.model.bind(graph)
            losses = []
            penalties = []
            for index in batch:
                loss, diagnostics = self.model.forward_example(p, self.examples[index], lambda_cov)
                losses.append(loss)
                penalties.extend(d['coverage_penalty'] for d in diagnostics)
            batch_loss = nx.mean(losses)
            graph.backward(batch_loss)
        except NonFiniteError as e:
            raise TrainingError(f"Non-finite value at iteration {iteration + 1}, batch examples {batch}: {e}")

        loss_value = float(batch_loss.value)
        if not math.isfinite(loss_value):
            raise TrainingError(f"Non-finite loss at iteration {iteration + 1}, batch examples {batch}")

        grads = {name: node.grad if node.grad is not None else np.zeros_like(node.value) for name, node in p.items()}
        grads, norm = clip_by_global_norm(grads, self.config.grad_clip_norm)
        logger.debug(f"Iteration {iteration + 1}: gradient norm {norm:.4f}")
        self.optimizer.step(self.model.params, grads)
        return loss_value, float(np.mean(penalties)) if penalties else 0.0

    def save(self) -> Optional[str]:
        if self.checkpoint_dir is None:
            return None
        path = os.path.join(self.checkpoint_dir, f"ckpt-{self.iteration:07d}.ckpt")
        save_model(path, self.model, self.iteration, self.config.seed, self.optimizer.accumulators,
                   extra={'train_config': asdict(self.config)})
        return path

    def train(self, iterations: Optional[int] = None) -> List[Dict]:
        """Run until max_iterations (or `iterations` more updates); returns the metric rows"""
        end = self.config.max_iterations if iterations is None else min(self.iteration + iterations, self.config.max_iterations)
        rows = []
        saved_at = None
        while self.iteration < end:
            loss, penalty = self.train_step(self.iteration)
            self.iteration += 1
            rows.append({'iteration': self.iteration, 'loss': loss, 'coverage_penalty': penalty})
            if self.metrics:
                self.metrics.append(self.iteration, loss, penalty)
            if self.iteration % self.config.log_every == 0:
                logger.info(f"Iteration {self.iteration}: loss {loss:.4f}, coverage penalty {penalty:.4f}")
            if self.iteration % self.config.checkpoint_every == 0:
                self.save()
                saved_at = self.iteration

        if saved_at != self.iteration:
            self.save()
        logger.info(f"Training stopped at iteration {self.iteration}")
        return rows


def check_training_set(chunks: List[Chunk]):
    if not chunks:
        raise ValueError("Training set is empty")
    missing = [i for i, c in enumerate(chunks) if c.reference_tokens is None]
    if missing:
        raise ValueError(f"{len(missing)} training chunks have no reference summary (first: {missing[0]})")


def train(chunks: List[Chunk], vocab: Vocabulary, model: KeyphrasePointerGenerator, config: TrainConfig,
          scorer: Optional[KeyPhraseScorer] = None, checkpoint_dir: Optional[str] = None,
          iterations: Optional[int] = None) -> List[Dict]:
    """Train `model` in place on reference-bearing chunks"""
    check_training_set(chunks)
    examples = build_examples(chunks, vocab, model.config, scorer)
    trainer = Trainer(model, examples, config, checkpoint_dir)
    return trainer.train(iterations)
