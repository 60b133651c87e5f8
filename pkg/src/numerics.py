"""
Reverse-mode differentiable primitives on numpy arrays.

A Graph records every node that needs a gradient in creation order; since
a node is always created after its parents, walking that list backwards is
a valid (and fixed) topological order for accumulation.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)

LOG_FLOOR = 1e-12


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible"""

    def __init__(self, op: str, *shapes):
        self.op = op
        self.shapes = shapes
        super().__init__(f"{op}: incompatible shapes {', '.join(str(tuple(s)) for s in shapes)}")


class NonFiniteError(ArithmeticError):
    """Raised when a primitive produces NaN or Inf"""


class Node:
    """A value in the computation graph plus its accumulated gradient"""

    __slots__ = ('value', 'grad', 'requires_grad', 'backward', 'graph', 'name')

    def __init__(self, graph: 'Graph', value: np.ndarray, requires_grad: bool = False,
                 backward: Optional[Callable[[np.ndarray], None]] = None, name: Optional[str] = None):
        self.graph = graph
        self.value = value
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.backward = backward
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def accumulate(self, g: np.ndarray):
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=self.value.dtype, copy=True).reshape(self.value.shape)
        else:
            self.grad += np.reshape(g, self.value.shape)

    def __repr__(self):
        return f"Node(name={self.name}, shape={self.shape})"


class Graph:
    """
    Tape for one forward/backward pass. With record=False nothing is
    retained and no gradients are tracked (inference).
    """

    def __init__(self, dtype=np.float64, record: bool = True):
        self.dtype = np.dtype(dtype)
        self.record = record
        self.nodes: List[Node] = []

    def param(self, value, name: Optional[str] = None) -> Node:
        value = _check_finite('param', np.asarray(value, dtype=self.dtype))
        node = Node(self, value, requires_grad=self.record, name=name)
        if self.record:
            self.nodes.append(node)
        return node

    def constant(self, value, name: Optional[str] = None) -> Node:
        value = np.asarray(value)
        if value.dtype.kind == 'f':
            value = value.astype(self.dtype, copy=False)
        return Node(self, _check_finite('constant', value), name=name)

    def emit(self, op: str, value: np.ndarray, parents: Sequence[Node],
             backward: Callable[[np.ndarray], None]) -> Node:
        value = _check_finite(op, value)
        requires_grad = self.record and any(p.requires_grad for p in parents)
        node = Node(self, value, requires_grad=requires_grad, backward=backward if requires_grad else None, name=op)
        if requires_grad:
            self.nodes.append(node)
        return node

    def backward(self, loss: Node):
        """Accumulate d(loss)/d(node) into every recorded node"""
        if loss.value.size != 1:
            raise ShapeError('backward', loss.shape)
        if not loss.requires_grad:
            return
        loss.grad = np.ones_like(loss.value)
        for node in reversed(self.nodes):
            if node.backward is not None and node.grad is not None:
                node.backward(node.grad)


def _check_finite(op: str, value: np.ndarray) -> np.ndarray:
    if value.dtype.kind == 'f' and not np.all(np.isfinite(value)):
        raise NonFiniteError(f"{op} produced non-finite values")
    return value


def _graph_of(*nodes: Node) -> Graph:
    return nodes[0].graph


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    # Sum a broadcast gradient back down to the operand's shape
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# ---------------------------------------------------------------------------
# Primitives
# ---------------------------------------------------------------------------

def matmul(a: Node, b: Node) -> Node:
    if a.value.ndim not in (1, 2) or b.value.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise ShapeError('matmul', a.shape, b.shape)
    av, bv = a.value, b.value

    def backward(g):
        if av.ndim == 1 and bv.ndim == 1:
            a.accumulate(g * bv)
            b.accumulate(g * av)
        elif av.ndim == 1:
            a.accumulate(bv @ g)
            b.accumulate(np.outer(av, g))
        elif bv.ndim == 1:
            a.accumulate(np.outer(g, bv))
            b.accumulate(av.T @ g)
        else:
            a.accumulate(g @ bv.T)
            b.accumulate(av.T @ g)

    return _graph_of(a).emit('matmul', av @ bv, (a, b), backward)


def affine(x: Node, W: Node, b: Node) -> Node:
    """x @ W + b for a vector or a matrix of row vectors"""
    if x.value.ndim not in (1, 2) or W.value.ndim != 2 or x.shape[-1] != W.shape[0] or b.shape != (W.shape[1],):
        raise ShapeError('affine', x.shape, W.shape, b.shape)
    xv, Wv = x.value, W.value

    def backward(g):
        x.accumulate(g @ Wv.T)
        if xv.ndim == 1:
            W.accumulate(np.outer(xv, g))
            b.accumulate(g)
        else:
            W.accumulate(xv.T @ g)
            b.accumulate(g.sum(axis=0))

    return _graph_of(x).emit('affine', xv @ Wv + b.value, (x, W, b), backward)


def add(*nodes: Node) -> Node:
    try:
        out_shape = np.broadcast_shapes(*(n.shape for n in nodes))
    except ValueError:
        raise ShapeError('add', *(n.shape for n in nodes))
    value = nodes[0].value
    for n in nodes[1:]:
        value = value + n.value

    def backward(g):
        for n in nodes:
            n.accumulate(_unbroadcast(g, n.shape))

    return _graph_of(*nodes).emit('add', np.broadcast_to(value, out_shape).copy(), nodes, backward)


def mul(a: Node, b: Node) -> Node:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError('mul', a.shape, b.shape)
    av, bv = a.value, b.value

    def backward(g):
        a.accumulate(_unbroadcast(g * bv, a.shape))
        b.accumulate(_unbroadcast(g * av, b.shape))

    return _graph_of(a).emit('mul', av * bv, (a, b), backward)


def scale(x: Node, k: float) -> Node:
    return _graph_of(x).emit('scale', x.value * k, (x,), lambda g: x.accumulate(g * k))


def concat(nodes: Sequence[Node]) -> Node:
    """Concatenate vectors"""
    if any(n.value.ndim != 1 for n in nodes):
        raise ShapeError('concat', *(n.shape for n in nodes))
    sizes = [n.shape[0] for n in nodes]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for n, start, stop in zip(nodes, offsets[:-1], offsets[1:]):
            n.accumulate(g[start:stop])

    return _graph_of(*nodes).emit('concat', np.concatenate([n.value for n in nodes]), nodes, backward)


def slice_(x: Node, start: int, stop: int) -> Node:
    if x.value.ndim != 1 or not 0 <= start < stop <= x.shape[0]:
        raise ShapeError('slice', x.shape, (start, stop))

    def backward(g):
        full = np.zeros_like(x.value)
        full[start:stop] = g
        x.accumulate(full)

    return _graph_of(x).emit('slice', x.value[start:stop].copy(), (x,), backward)


def stack(nodes: Sequence[Node]) -> Node:
    """Stack equal-length vectors into the rows of a matrix"""
    if not nodes or any(n.shape != nodes[0].shape or n.value.ndim != 1 for n in nodes):
        raise ShapeError('stack', *(n.shape for n in nodes))

    def backward(g):
        for row, n in enumerate(nodes):
            n.accumulate(g[row])

    return _graph_of(*nodes).emit('stack', np.stack([n.value for n in nodes]), nodes, backward)


def outer(a: Node, b: Node) -> Node:
    if a.value.ndim != 1 or b.value.ndim != 1:
        raise ShapeError('outer', a.shape, b.shape)
    av, bv = a.value, b.value

    def backward(g):
        a.accumulate(g @ bv)
        b.accumulate(av @ g)

    return _graph_of(a).emit('outer', np.outer(av, bv), (a, b), backward)


def tanh(x: Node) -> Node:
    y = np.tanh(x.value)
    return _graph_of(x).emit('tanh', y, (x,), lambda g: x.accumulate(g * (1.0 - y * y)))


def sigmoid(x: Node) -> Node:
    y = _sigmoid(x.value)
    return _graph_of(x).emit('sigmoid', y, (x,), lambda g: x.accumulate(g * y * (1.0 - y)))


def softmax(x: Node) -> Node:
    """Softmax over the last axis, stabilized by subtracting the row maximum"""
    if x.value.ndim not in (1, 2) or x.shape[-1] == 0:
        raise ShapeError('softmax', x.shape)
    shifted = x.value - x.value.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        x.accumulate(y * (g - (g * y).sum(axis=-1, keepdims=True)))

    return _graph_of(x).emit('softmax', y, (x,), backward)


def embed_lookup(E: Node, ids) -> Node:
    """Rows of an embedding matrix; a scalar id gives a vector"""
    ids = np.asarray(ids, dtype=np.int64)
    if E.value.ndim != 2 or (ids.size and (ids.min() < 0 or ids.max() >= E.shape[0])):
        raise ShapeError('embed_lookup', E.shape, ids.shape)

    def backward(g):
        # Scatter straight into the gradient buffer; the table can be large
        if not E.requires_grad:
            return
        if E.grad is None:
            E.grad = np.zeros_like(E.value)
        np.add.at(E.grad, ids, g)

    return _graph_of(E).emit('embed_lookup', E.value[ids].copy(), (E,), backward)


def weighted_sum(weights: Node, rows: Node) -> Node:
    """sum_k weights[k] * rows[k]"""
    if weights.value.ndim != 1 or rows.value.ndim != 2 or weights.shape[0] != rows.shape[0]:
        raise ShapeError('weighted_sum', weights.shape, rows.shape)
    wv, rv = weights.value, rows.value

    def backward(g):
        weights.accumulate(rv @ g)
        rows.accumulate(np.outer(wv, g))

    return _graph_of(weights).emit('weighted_sum', wv @ rv, (weights, rows), backward)


def elementwise_min(a: Node, b: Node) -> Node:
    """Elementwise minimum; on ties the gradient goes to the first argument"""
    if a.shape != b.shape:
        raise ShapeError('elementwise_min', a.shape, b.shape)
    take_a = a.value <= b.value

    def backward(g):
        a.accumulate(np.where(take_a, g, 0.0))
        b.accumulate(np.where(take_a, 0.0, g))

    return _graph_of(a).emit('elementwise_min', np.where(take_a, a.value, b.value), (a, b), backward)


def log(x: Node, floor: float = LOG_FLOOR) -> Node:
    """log(max(x, floor)); no gradient below the floor"""
    xv = x.value
    above = xv >= floor
    safe = np.maximum(xv, floor)

    def backward(g):
        x.accumulate(np.where(above, g / safe, 0.0))

    return _graph_of(x).emit('log', np.log(safe), (x,), backward)


def scalar_mix(w: Union[float, Node], a: Node, b: Node) -> Node:
    """w * a + (1 - w) * b with w a constant or a one-element node"""
    if a.shape != b.shape:
        raise ShapeError('scalar_mix', a.shape, b.shape)
    if isinstance(w, Node):
        if w.value.size != 1:
            raise ShapeError('scalar_mix', w.shape, a.shape, b.shape)
        wv = w.value.reshape(())
        parents = (w, a, b)
    else:
        wv = w
        parents = (a, b)
    av, bv = a.value, b.value

    def backward(g):
        a.accumulate(g * wv)
        b.accumulate(g * (1.0 - wv))
        if isinstance(w, Node):
            w.accumulate(np.sum(g * (av - bv)))

    return _graph_of(a).emit('scalar_mix', wv * av + (1.0 - wv) * bv, parents, backward)


def scatter_add(values: Node, indices, size: int) -> Node:
    """out[indices[k]] += values[k] for an output vector of the given size"""
    indices = np.asarray(indices, dtype=np.int64)
    if values.value.ndim != 1 or indices.shape != values.shape or (indices.size and (indices.min() < 0 or indices.max() >= size)):
        raise ShapeError('scatter_add', values.shape, indices.shape, (size,))
    out = np.zeros(size, dtype=values.value.dtype)
    np.add.at(out, indices, values.value)

    def backward(g):
        values.accumulate(g[indices])

    return _graph_of(values).emit('scatter_add', out, (values,), backward)


def pick(x: Node, index: int) -> Node:
    if x.value.ndim != 1 or not 0 <= index < x.shape[0]:
        raise ShapeError('pick', x.shape, (index,))

    def backward(g):
        full = np.zeros_like(x.value)
        full[index] = g
        x.accumulate(full)

    return _graph_of(x).emit('pick', np.array(x.value[index]), (x,), backward)


def total(x: Node) -> Node:
    return _graph_of(x).emit('total', np.array(x.value.sum()), (x,),
                             lambda g: x.accumulate(np.broadcast_to(g, x.shape)))


def mean(nodes: Sequence[Node]) -> Node:
    """Mean of scalar nodes"""
    if not nodes or any(n.value.size != 1 for n in nodes):
        raise ShapeError('mean', *(n.shape for n in nodes))
    k = 1.0 / len(nodes)

    def backward(g):
        for n in nodes:
            n.accumulate(g * k)

    value = np.array(sum(float(n.value.reshape(())) for n in nodes) * k, dtype=nodes[0].value.dtype)
    return _graph_of(*nodes).emit('mean', value, nodes, backward)


def lstm_cell(x: Node, state: Node, W: Node, b: Node) -> Node:
    """
    One LSTM step. state is the concatenation [h; c] and so is the result.
    W has shape (input + hidden, 4 * hidden), gates ordered i, f, g, o.
    """
    hidden = state.shape[0] // 2
    n_in = x.shape[0]
    if x.value.ndim != 1 or state.value.ndim != 1 or W.shape != (n_in + hidden, 4 * hidden) or b.shape != (4 * hidden,):
        raise ShapeError('lstm_cell', x.shape, state.shape, W.shape, b.shape)

    h, c = state.value[:hidden], state.value[hidden:]
    xh = np.concatenate([x.value, h])
    z = xh @ W.value + b.value
    i = _sigmoid(z[:hidden])
    f = _sigmoid(z[hidden:2 * hidden])
    gg = np.tanh(z[2 * hidden:3 * hidden])
    o = _sigmoid(z[3 * hidden:])
    c_new = f * c + i * gg
    tc = np.tanh(c_new)
    h_new = o * tc

    def backward(g):
        dh = g[:hidden]
        dc_new = g[hidden:] + dh * o * (1.0 - tc * tc)
        dz = np.concatenate([
            dc_new * gg * i * (1.0 - i),
            dc_new * c * f * (1.0 - f),
            dc_new * i * (1.0 - gg * gg),
            dh * tc * o * (1.0 - o),
        ])
        W.accumulate(np.outer(xh, dz))
        b.accumulate(dz)
        dxh = W.value @ dz
        x.accumulate(dxh[:n_in])
        state.accumulate(np.concatenate([dxh[n_in:], dc_new * f]))

    return _graph_of(x).emit('lstm_cell', np.concatenate([h_new, c_new]), (x, state, W, b), backward)


# ---------------------------------------------------------------------------
# Finite-difference gradient check
# ---------------------------------------------------------------------------

@dataclass
class GradCheckReport:
    max_error: float
    errors: Dict[str, float] = field(default_factory=dict)
    max_abs_diff: Dict[str, float] = field(default_factory=dict)
    norm_errors: Dict[str, float] = field(default_factory=dict)

    def passed(self, tolerance: float) -> bool:
        return self.max_error < tolerance


def grad_check(f: Callable[[List[Node]], Node], inputs: Sequence[np.ndarray], epsilon: float = 1e-5,
               names: Optional[Sequence[str]] = None) -> GradCheckReport:
    """
    Compare reverse-mode gradients of the scalar f with central differences.

    f receives one node per input (all on the same 64-bit graph) and must
    return a one-element node. Per input tensor the reported error is the
    largest elementwise |a - n| / max(|a|, |n|, 1e-8); norm_errors keeps the
    whole-tensor ratio ||a - n|| / max(||a||, ||n||, 1e-8) for diagnostics.
    """
    inputs = [np.array(x, dtype=np.float64) for x in inputs]
    names = list(names) if names is not None else [f"input{i}" for i in range(len(inputs))]

    graph = Graph(np.float64)
    nodes = [graph.param(x, name=name) for x, name in zip(inputs, names)]
    loss = f(nodes)
    graph.backward(loss)
    analytic = [n.grad if n.grad is not None else np.zeros_like(n.value) for n in nodes]

    def evaluate(values: List[np.ndarray]) -> float:
        g = Graph(np.float64, record=False)
        out = float(f([g.constant(v) for v in values]).value.reshape(()))
        if not np.isfinite(out):
            raise NonFiniteError("grad_check: non-finite function value")
        return out

    report = GradCheckReport(max_error=0.0)
    for i, (x, name) in enumerate(zip(inputs, names)):
        numeric = np.zeros_like(x)
        values = [v.copy() for v in inputs]
        for j in range(x.size):
            original = values[i].flat[j]
            values[i].flat[j] = original + epsilon
            plus = evaluate(values)
            values[i].flat[j] = original - epsilon
            minus = evaluate(values)
            values[i].flat[j] = original
            numeric.flat[j] = (plus - minus) / (2.0 * epsilon)

        delta = np.abs(analytic[i] - numeric)
        floor = np.maximum(np.maximum(np.abs(analytic[i]), np.abs(numeric)), 1e-8)
        report.errors[name] = float(np.max(delta / floor)) if x.size else 0.0
        report.norm_errors[name] = float(np.linalg.norm(delta) / max(np.linalg.norm(analytic[i]),
                                                                     np.linalg.norm(numeric), 1e-8))
        report.max_abs_diff[name] = float(np.max(delta)) if x.size else 0.0
        report.max_error = max(report.max_error, report.errors[name])
        logger.debug(f"grad_check {name}: rel error {report.errors[name]:.3e}")

    return report
