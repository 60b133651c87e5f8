import json
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np

from corpus import Chunk, MAX_REFERENCE_TOKENS
from numerics import LOG_FLOOR
from vocab import ExtendedEncoding, Vocabulary, decode_ids, START_ID, STOP_ID
from model import KeyphrasePointerGenerator

logger = logging.getLogger(__name__)

# (decoder state, previous extended id) -> (distribution over extended vocab, next state, p_gen)
StepFunction = Callable[[Any, int], Tuple[np.ndarray, Any, Optional[float]]]


@dataclass
class DecodeConfig:
    beam_size: int = 5
    min_length: int = 35
    max_length: int = MAX_REFERENCE_TOKENS
    keyphrase_at_decode: bool = False
    length_normalize: bool = False

    def validate(self):
        if self.beam_size < 1:
            raise ValueError(f"beam_size must be >= 1, got {self.beam_size}")
        if not 0 <= self.min_length <= self.max_length:
            raise ValueError(f"Need 0 <= min_length <= max_length, got {self.min_length} and {self.max_length}")
        return self


@dataclass
class Hypothesis:
    token_ids: List[int]
    log_prob: float
    decoder_state: Any
    finished: bool = False
    p_gens: List[float] = field(default_factory=list)

    def extend(self, token_id: int, log_prob: float, state: Any, p_gen: Optional[float]) -> 'Hypothesis':
        return Hypothesis(
            token_ids=self.token_ids + [token_id],
            log_prob=self.log_prob + log_prob,
            decoder_state=state,
            finished=token_id == STOP_ID,
            p_gens=self.p_gens + ([p_gen] if p_gen is not None else []),
        )

    @property
    def output_ids(self) -> List[int]:
        """Generated ids without the closing STOP"""
        return self.token_ids[:-1] if self.finished else list(self.token_ids)

    def score(self, length_normalize: bool = False) -> float:
        if length_normalize and self.token_ids:
            return self.log_prob / len(self.token_ids)
        return self.log_prob


@dataclass
class DecodeResult:
    token_ids: List[int]
    tokens: List[str]
    log_prob: float
    p_gens: List[float]

    @property
    def text(self) -> str:
        return ' '.join(self.tokens)


def mask_stop(probs: np.ndarray, length: int, min_length: int, stop_id: int = STOP_ID) -> np.ndarray:
    """Forbid STOP before min_length generated tokens, renormalizing the rest"""
    if length >= min_length or stop_id >= len(probs):
        return probs
    masked = np.array(probs, dtype=np.float64)
    masked[stop_id] = 0.0
    mass = masked.sum()
    if mass <= 0.0:
        masked = np.ones_like(masked)
        masked[stop_id] = 0.0
        mass = masked.sum()
    return masked / mass


def step_log_probs(probs: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(probs, LOG_FLOOR))


class BeamSearchDecoder:
    """
    Length-unnormalized beam search. Each live hypothesis proposes its
    2*beam_size best extensions; the beam_size best non-STOP candidates stay
    live and STOP candidates become results. Candidates are ranked by score,
    ties broken by the lexicographically smallest id sequence. A finished
    hypothesis always beats an unfinished one; the best live hypothesis is
    returned only when nothing emitted STOP before max_length.
    """

    def __init__(self, config: DecodeConfig):
        self.config = config.validate()

    def _sort_key(self, hyp: Hypothesis):
        return (-hyp.score(self.config.length_normalize), tuple(hyp.token_ids))

    def search(self, step_fn: StepFunction, initial_state: Any) -> Hypothesis:
        config = self.config
        live = [Hypothesis(token_ids=[], log_prob=0.0, decoder_state=initial_state)]
        results: List[Hypothesis] = []

        for _ in range(config.max_length):
            candidates = []
            for hyp in live:
                previous = hyp.token_ids[-1] if hyp.token_ids else START_ID
                probs, state, p_gen = step_fn(hyp.decoder_state, previous)
                probs = mask_stop(probs, len(hyp.token_ids), config.min_length)
                log_probs = step_log_probs(probs)
                for token_id in np.argsort(-log_probs, kind='stable')[:2 * config.beam_size]:
                    if probs[token_id] <= 0.0:
                        break
                    candidates.append(hyp.extend(int(token_id), float(log_probs[token_id]), state, p_gen))

            live = []
            for candidate in sorted(candidates, key=self._sort_key):
                if candidate.finished:
                    results.append(candidate)
                else:
                    live.append(candidate)
                if len(live) == config.beam_size or len(results) == config.beam_size:
                    break

            if len(results) >= config.beam_size or not live:
                break

        if not results:
            # max_length reached before any hypothesis emitted STOP
            results.extend(live)
        best = min(results, key=self._sort_key)
        logger.debug(f"Beam search kept {len(results)} hypotheses, best log prob {best.log_prob:.4f}")
        return best


def model_step_function(model: KeyphrasePointerGenerator, encoding: ExtendedEncoding,
                        gamma_bar: Optional[np.ndarray] = None,
                        keyphrase_at_decode: bool = False) -> Tuple[StepFunction, Any]:
    """Adapts a model's decode session to the StepFunction protocol"""
    session = model.start_decoding(encoding, gamma_bar, keyphrase_at_decode)

    def step(state, previous_id):
        probs, next_state, output = session.step(state, previous_id)
        return probs, next_state, float(output.p_gen.value[0])

    return step, session.initial_state


def _check_source(chunk: Chunk, encoding: ExtendedEncoding):
    if not chunk.source_tokens or not encoding.base_ids:
        raise ValueError("Cannot decode an empty chunk")


def _result(hyp: Hypothesis, vocab: Vocabulary, encoding: ExtendedEncoding) -> DecodeResult:
    ids = hyp.output_ids
    return DecodeResult(token_ids=ids, tokens=decode_ids(ids, vocab, encoding.oov_tokens),
                        log_prob=hyp.log_prob, p_gens=hyp.p_gens)


def beam_search(model: KeyphrasePointerGenerator, chunk: Chunk, encoding: ExtendedEncoding,
                config: DecodeConfig, vocab: Vocabulary, gamma_bar: Optional[np.ndarray] = None) -> DecodeResult:
    """Summary of one chunk; OOV copies are rendered from the chunk's source"""
    _check_source(chunk, encoding)
    step_fn, initial_state = model_step_function(model, encoding, gamma_bar, config.keyphrase_at_decode)
    best = BeamSearchDecoder(config).search(step_fn, initial_state)
    return _result(best, vocab, encoding)


def greedy_search(step_fn: StepFunction, initial_state: Any, max_length: int, min_length: int = 0) -> Hypothesis:
    hyp = Hypothesis(token_ids=[], log_prob=0.0, decoder_state=initial_state)
    while len(hyp.token_ids) < max_length:
        previous = hyp.token_ids[-1] if hyp.token_ids else START_ID
        probs, state, p_gen = step_fn(hyp.decoder_state, previous)
        log_probs = step_log_probs(mask_stop(probs, len(hyp.token_ids), min_length))
        token_id = int(np.argmax(log_probs))
        hyp = hyp.extend(token_id, float(log_probs[token_id]), state, p_gen)
        if hyp.finished:
            break
    return hyp


def greedy_decode(model: KeyphrasePointerGenerator, encoding: ExtendedEncoding, vocab: Vocabulary,
                  max_length: int = MAX_REFERENCE_TOKENS, min_length: int = 0,
                  gamma_bar: Optional[np.ndarray] = None, keyphrase_at_decode: bool = False) -> DecodeResult:
    if not encoding.base_ids:
        raise ValueError("Cannot decode an empty source")
    step_fn, initial_state = model_step_function(model, encoding, gamma_bar, keyphrase_at_decode)
    return _result(greedy_search(step_fn, initial_state, max_length, min_length), vocab, encoding)


def write_sidecar(path: str, results: Sequence[DecodeResult]):
    """Per-summary log probability and p_gen trace as JSON"""
    records = [
        {'index': i, 'length': len(r.token_ids), 'log_prob': r.log_prob, 'p_gens': r.p_gens}
        for i, r in enumerate(results)
    ]
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(records, f, indent=2)
    logger.info(f"Wrote decode sidecar for {len(records)} summaries to {path}")
