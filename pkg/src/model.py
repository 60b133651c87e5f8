import logging
from dataclasses import dataclass, asdict
from typing import Dict, List, Optional, Tuple

import numpy as np

import numerics as nx
from numerics import Graph, Node
from corpus import Chunk
from vocab import (DEFAULT_MAX_SIZE, RESERVED_TOKENS, ExtendedEncoding, Vocabulary, encode_extended, encode_target,
                   START_ID, STOP_ID, UNK_ID)

MAX_VOCAB_SIZE = DEFAULT_MAX_SIZE + len(RESERVED_TOKENS)

logger = logging.getLogger(__name__)

ModelParams = Dict[str, np.ndarray]

TRAIN_MODE = 'train'
DECODE_MODE = 'decode'


@dataclass
class ModelConfig:
    hidden_dim: int = 256
    embed_dim: int = 128
    vocab_size: int = 50004
    w1: float = 0.5
    w2: float = 0.5
    lambda_cov: float = 1.0
    max_source_len: int = 400
    max_target_len: int = 200
    zero_keyphrase_fallback: bool = False
    init_scale: float = 0.1
    dtype: str = 'float32'

    def validate(self):
        for name in ('hidden_dim', 'embed_dim', 'vocab_size', 'max_source_len', 'max_target_len'):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.vocab_size > MAX_VOCAB_SIZE:
            raise ValueError(f"vocab_size must be at most {MAX_VOCAB_SIZE} (words plus reserved tokens), "
                             f"got {self.vocab_size}")
        if abs(self.w1 + self.w2 - 1.0) > 1e-9:
            raise ValueError(f"w1 + w2 must equal 1, got {self.w1} + {self.w2}")
        if not ((0.0 < self.w1 < 1.0) or (self.w1 == 1.0 and self.w2 == 0.0)):
            raise ValueError(f"w1 must lie in (0, 1), or (w1, w2) = (1, 0) for the plain pointer-generator; got {self.w1}")
        if self.lambda_cov < 0:
            raise ValueError(f"lambda_cov must be >= 0, got {self.lambda_cov}")
        if self.dtype not in ('float32', 'float64'):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype}")
        return self

    @property
    def attention_dim(self) -> int:
        return 2 * self.hidden_dim

    @property
    def keyphrase_attention(self) -> bool:
        return self.w2 > 0.0


@dataclass
class EncoderStates:
    h: Node          # N x 2H, forward and backward hidden states per position
    features: Node   # N x A, h @ W_h


@dataclass
class DecoderState:
    s: Node          # [h; c] of the decoder LSTM
    coverage: Node   # running sum of past attention, length N
    step: int = 0


@dataclass
class StepOutput:
    attention: Node
    context: Node
    p_vocab: Node
    p_gen: Node
    p_final: Node


@dataclass
class PreparedExample:
    encoding: ExtendedEncoding
    gamma_bar: np.ndarray
    decoder_inputs: List[int]
    targets: List[int]
    extended_size: int


def param_shapes(config: ModelConfig) -> Dict[str, Tuple[int, ...]]:
    H, E, V, A = config.hidden_dim, config.embed_dim, config.vocab_size, config.attention_dim
    return {
        'embedding': (V, E),
        'enc_fw_W': (E + H, 4 * H), 'enc_fw_b': (4 * H,),
        'enc_bw_W': (E + H, 4 * H), 'enc_bw_b': (4 * H,),
        'reduce_h_W': (2 * H, H), 'reduce_h_b': (H,),
        'reduce_c_W': (2 * H, H), 'reduce_c_b': (H,),
        'dec_W': (E + H, 4 * H), 'dec_b': (4 * H,),
        'attn_W_h': (2 * H, A), 'attn_W_s': (2 * H, A),
        'attn_w_c': (A,), 'attn_b': (A,), 'attn_v': (A,),
        'out_U': (4 * H, V), 'out_b': (V,),
        'gen_w_context': (2 * H, 1), 'gen_w_state': (2 * H, 1), 'gen_w_input': (E, 1), 'gen_b': (1,),
    }


def init_params(config: ModelConfig, seed: int = 0) -> ModelParams:
    """Uniform in [-init_scale, init_scale], drawn in sorted name order"""
    rng = np.random.default_rng(seed)
    shapes = param_shapes(config)
    return {
        name: rng.uniform(-config.init_scale, config.init_scale, size=shapes[name]).astype(config.dtype)
        for name in sorted(shapes)
    }


# ---------------------------------------------------------------------------
# Parameter-free pieces of a decoder step
# ---------------------------------------------------------------------------

def context(a: Node, h: EncoderStates) -> Node:
    """h*_t = sum_k a_k h_k"""
    return nx.weighted_sum(a, h.h)


def final_dist(p_gen: Node, p_vocab: Node, attention: Node, encoding: ExtendedEncoding) -> Node:
    """P(w) = p_gen * P_vocab(w) + (1 - p_gen) * attention mass on source copies of w"""
    vocab_size = p_vocab.shape[0]
    extended_size = vocab_size + len(encoding.oov_tokens)
    if attention.shape[0] != len(encoding.extended_ids):
        raise nx.ShapeError('final_dist', attention.shape, (len(encoding.extended_ids),))
    generated = nx.scatter_add(p_vocab, np.arange(vocab_size), extended_size)
    copied = nx.scatter_add(attention, encoding.extended_ids, extended_size)
    return nx.scalar_mix(p_gen, generated, copied)


def step_loss(p_final: Node, target_extended_id: int, attention: Node, coverage: Node,
              lambda_cov: float) -> Tuple[Node, Node, Node]:
    """-log P(target) + lambda * sum_k min(a_k, c_k); returns (loss, nll, coverage penalty)"""
    if not 0 <= target_extended_id < p_final.shape[0]:
        raise ValueError(f"Target id {target_extended_id} outside extended vocabulary of size {p_final.shape[0]}")
    nll = nx.scale(nx.log(nx.pick(p_final, target_extended_id)), -1.0)
    penalty = nx.total(nx.elementwise_min(attention, coverage))
    if lambda_cov == 0.0:
        return nll, nll, penalty
    return nx.add(nll, nx.scale(penalty, lambda_cov)), nll, penalty


class KeyphrasePointerGenerator:
    """
    Pointer-generator with coverage whose training-time attention mixes the
    usual additive attention with a softmax over key-phrase weights of the
    source positions.
    """

    def __init__(self, config: ModelConfig, params: ModelParams):
        config.validate()
        shapes = param_shapes(config)
        missing = sorted(set(shapes) - set(params))
        if missing:
            raise ValueError(f"Missing model parameters: {missing}")
        for name, shape in shapes.items():
            if params[name].shape != shape:
                raise nx.ShapeError(f"param {name}", params[name].shape, shape)
        self.config = config
        self.params = params

    @classmethod
    def initialize(cls, config: ModelConfig, seed: int = 0) -> 'KeyphrasePointerGenerator':
        return cls(config, init_params(config, seed))

    @property
    def dtype(self):
        return np.dtype(self.config.dtype)

    def bind(self, graph: Graph) -> Dict[str, Node]:
        """Graph nodes for every parameter, trainable when the graph records"""
        if graph.record:
            return {name: graph.param(self.params[name], name=name) for name in sorted(self.params)}
        return {name: graph.constant(self.params[name], name=name) for name in sorted(self.params)}

    # -- encoder -------------------------------------------------------------

    def encode(self, p: Dict[str, Node], base_ids: List[int]) -> Tuple[EncoderStates, Node]:
        """BiLSTM over the source; returns per-position states and the decoder's initial [h; c]"""
        n = len(base_ids)
        if n == 0:
            raise ValueError("Cannot encode an empty source")
        if n > self.config.max_source_len:
            raise ValueError(f"Source of {n} tokens exceeds max_source_len {self.config.max_source_len}")

        graph = p['embedding'].graph
        H = self.config.hidden_dim
        zero_state = graph.constant(np.zeros(2 * H))
        embedded = [nx.embed_lookup(p['embedding'], token_id) for token_id in base_ids]

        forward_states = []
        state = zero_state
        for x in embedded:
            state = nx.lstm_cell(x, state, p['enc_fw_W'], p['enc_fw_b'])
            forward_states.append(state)

        backward_states = [None] * n
        state = zero_state
        for k in reversed(range(n)):
            state = nx.lstm_cell(embedded[k], state, p['enc_bw_W'], p['enc_bw_b'])
            backward_states[k] = state

        rows = [nx.concat([nx.slice_(forward_states[k], 0, H), nx.slice_(backward_states[k], 0, H)])
                for k in range(n)]
        h = nx.stack(rows)
        features = nx.matmul(h, p['attn_W_h'])

        # Final forward state is at position N-1, final backward state at position 0
        final_h = nx.concat([nx.slice_(forward_states[-1], 0, H), nx.slice_(backward_states[0], 0, H)])
        final_c = nx.concat([nx.slice_(forward_states[-1], H, 2 * H), nx.slice_(backward_states[0], H, 2 * H)])
        init_state = nx.concat([
            nx.affine(final_h, p['reduce_h_W'], p['reduce_h_b']),
            nx.affine(final_c, p['reduce_c_W'], p['reduce_c_b']),
        ])
        return EncoderStates(h=h, features=features), init_state

    # -- decoder pieces --------------------------------------------------------

    def attention_step(self, p: Dict[str, Node], h: EncoderStates, s_t: Node, coverage: Node,
                       gamma_bar: Optional[np.ndarray], mode: str = TRAIN_MODE,
                       keyphrase_at_decode: bool = False) -> Node:
        n = h.h.shape[0]
        if coverage.shape != (n,) or (gamma_bar is not None and len(gamma_bar) != n):
            raise nx.ShapeError('attention_step', h.h.shape, coverage.shape,
                                (len(gamma_bar),) if gamma_bar is not None else ())

        decoder_features = nx.affine(s_t, p['attn_W_s'], p['attn_b'])
        coverage_features = nx.outer(coverage, p['attn_w_c'])
        energies = nx.matmul(nx.tanh(nx.add(h.features, decoder_features, coverage_features)), p['attn_v'])
        attention = nx.softmax(energies)

        use_keyphrases = self.config.keyphrase_attention and gamma_bar is not None and (
            mode == TRAIN_MODE or keyphrase_at_decode)
        if use_keyphrases and self.config.zero_keyphrase_fallback and not np.any(gamma_bar):
            use_keyphrases = False
        if not use_keyphrases:
            return attention

        keyphrase_attention = nx.softmax(s_t.graph.constant(gamma_bar))
        return nx.scalar_mix(self.config.w1, attention, keyphrase_attention)

    def vocab_dist(self, p: Dict[str, Node], s_t: Node, h_star: Node) -> Node:
        """P_vocab = softmax(U [s_t; h*_t] + b)"""
        return nx.softmax(nx.affine(nx.concat([s_t, h_star]), p['out_U'], p['out_b']))

    def gen_prob(self, p: Dict[str, Node], h_star: Node, s_t: Node, x_t: Node) -> Node:
        """p_gen = sigmoid(w_h* . h*_t + w_s . s_t + w_x . x_t + b_p)"""
        return nx.sigmoid(nx.add(
            nx.affine(h_star, p['gen_w_context'], p['gen_b']),
            nx.matmul(s_t, p['gen_w_state']),
            nx.matmul(x_t, p['gen_w_input']),
        ))

    def decoder_step(self, p: Dict[str, Node], h: EncoderStates, state: DecoderState, input_id: int,
                     gamma_bar: Optional[np.ndarray], encoding: ExtendedEncoding, mode: str = TRAIN_MODE,
                     keyphrase_at_decode: bool = False) -> Tuple[StepOutput, DecoderState]:
        """One decoder step fed with base-vocabulary id input_id"""
        x_t = nx.embed_lookup(p['embedding'], input_id)
        s_t = nx.lstm_cell(x_t, state.s, p['dec_W'], p['dec_b'])
        attention = self.attention_step(p, h, s_t, state.coverage, gamma_bar, mode, keyphrase_at_decode)
        h_star = context(attention, h)
        p_vocab = self.vocab_dist(p, s_t, h_star)
        p_gen = self.gen_prob(p, h_star, s_t, x_t)
        p_final = final_dist(p_gen, p_vocab, attention, encoding)

        output = StepOutput(attention=attention, context=h_star, p_vocab=p_vocab, p_gen=p_gen, p_final=p_final)
        next_state = DecoderState(s=s_t, coverage=nx.add(state.coverage, attention), step=state.step + 1)
        return output, next_state

    def initial_decoder_state(self, graph: Graph, init_state: Node, n: int) -> DecoderState:
        return DecoderState(s=init_state, coverage=graph.constant(np.zeros(n)), step=0)

    # -- full example ------------------------------------------------------------

    def forward_example(self, p: Dict[str, Node], example: PreparedExample,
                        lambda_cov: Optional[float] = None, mode: str = TRAIN_MODE) -> Tuple[Node, List[Dict]]:
        """Teacher-forced mean step loss over the target, plus per-step diagnostics"""
        if not example.targets or example.targets[-1] != STOP_ID:
            raise ValueError("Target must be non-empty and end with STOP")
        lambda_cov = self.config.lambda_cov if lambda_cov is None else lambda_cov

        graph = p['embedding'].graph
        h, init_state = self.encode(p, example.encoding.base_ids)
        state = self.initial_decoder_state(graph, init_state, len(example.encoding.base_ids))

        losses = []
        diagnostics = []
        for input_id, target_id in zip(example.decoder_inputs, example.targets):
            output, next_state = self.decoder_step(p, h, state, input_id, example.gamma_bar,
                                                   example.encoding, mode)
            loss, nll, penalty = step_loss(output.p_final, target_id, output.attention, state.coverage, lambda_cov)
            losses.append(loss)
            diagnostics.append({
                'step': state.step,
                'nll': float(nll.value),
                'coverage_penalty': float(penalty.value),
                'p_gen': float(output.p_gen.value[0]),
                'attention': output.attention.value.copy(),
            })
            state = next_state

        return nx.mean(losses), diagnostics

    def loss(self, example: PreparedExample, lambda_cov: Optional[float] = None) -> float:
        """Forward-only loss of one example"""
        graph = Graph(self.dtype, record=False)
        total, _ = self.forward_example(self.bind(graph), example, lambda_cov)
        return float(total.value)

    def start_decoding(self, encoding: ExtendedEncoding, gamma_bar: Optional[np.ndarray] = None,
                       keyphrase_at_decode: bool = False) -> 'DecodeSession':
        return DecodeSession(self, encoding, gamma_bar, keyphrase_at_decode)


class DecodeSession:
    """Inference-only wrapper: encodes once, then advances decoder states on demand"""

    def __init__(self, model: KeyphrasePointerGenerator, encoding: ExtendedEncoding,
                 gamma_bar: Optional[np.ndarray], keyphrase_at_decode: bool):
        self.model = model
        self.encoding = encoding
        self.gamma_bar = gamma_bar
        self.keyphrase_at_decode = keyphrase_at_decode
        self.vocab_size = model.config.vocab_size
        self.graph = Graph(model.dtype, record=False)
        self.p = model.bind(self.graph)
        self.h, init_state = model.encode(self.p, encoding.base_ids)
        self.initial_state = model.initial_decoder_state(self.graph, init_state, len(encoding.base_ids))

    def step(self, state: DecoderState, previous_id: int) -> Tuple[np.ndarray, DecoderState, StepOutput]:
        """Distribution over the extended vocabulary after feeding previous_id"""
        input_id = previous_id if previous_id < self.vocab_size else UNK_ID
        output, next_state = self.model.decoder_step(self.p, self.h, state, input_id, self.gamma_bar,
                                                     self.encoding, DECODE_MODE, self.keyphrase_at_decode)
        return output.p_final.value.astype(np.float64), next_state, output


def prepare_example(chunk: Chunk, vocab: Vocabulary, config: ModelConfig,
                    gamma_bar: Optional[np.ndarray] = None) -> PreparedExample:
    """Truncate, encode and build teacher-forcing inputs/targets for one chunk"""
    if chunk.reference_tokens is None:
        raise ValueError("Training chunk has no reference summary")
    if vocab.size != config.vocab_size:
        raise ValueError(f"Vocabulary has {vocab.size} tokens, model expects {config.vocab_size}")
    source = chunk.source_tokens[:config.max_source_len]
    if not source:
        raise ValueError("Training chunk has an empty source")
    reference = chunk.reference_tokens[:config.max_target_len]

    encoding = encode_extended(source, vocab)
    if gamma_bar is None:
        gamma_bar = np.zeros(len(source))
    elif len(gamma_bar) != len(source):
        raise ValueError(f"gamma_bar has length {len(gamma_bar)}, source has {len(source)} tokens")

    decoder_inputs = [START_ID] + [vocab.id_of(t) for t in reference]
    targets = encode_target(reference, vocab, encoding.oov_tokens) + [STOP_ID]
    return PreparedExample(
        encoding=encoding,
        gamma_bar=np.asarray(gamma_bar, dtype=np.float64),
        decoder_inputs=decoder_inputs,
        targets=targets,
        extended_size=vocab.size + len(encoding.oov_tokens),
    )


def config_to_dict(config: ModelConfig) -> Dict:
    return asdict(config)
