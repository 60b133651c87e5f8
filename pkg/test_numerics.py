#!/usr/bin/env python3
"""
Tests for the differentiable primitives and the finite-difference harness
"""
import os
import sys
sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), 'src'))

import numpy as np

import numerics as nx
from numerics import Graph, NonFiniteError, ShapeError, grad_check

TOLERANCE = 1e-6


def project(node, seed=0):
    """Scalar of a node: sum(node * fixed random weights)"""
    weights = np.random.default_rng(seed + 100).normal(size=node.shape)
    return nx.total(nx.mul(node, node.graph.constant(weights)))


def check(f, *inputs):
    report = grad_check(f, list(inputs))
    assert report.passed(TOLERANCE), f"max relative error {report.max_error:.3e}: {report.errors}"
    return report


def rng(seed=0):
    return np.random.default_rng(seed)


def test_softmax_and_sigmoid_values():
    g = Graph()
    assert np.allclose(nx.softmax(g.constant([0.0, 0.0])).value, [0.5, 0.5], atol=0, rtol=0)
    assert float(nx.sigmoid(g.constant([0.0])).value[0]) == 0.5


def test_softmax_shift_invariance():
    g = Graph()
    x = rng(1).normal(size=(3, 7))
    shifted = x + np.array([[5.0], [-3.0], [100.0]])
    assert np.max(np.abs(nx.softmax(g.constant(x)).value - nx.softmax(g.constant(shifted)).value)) <= 1e-12
    rows = nx.softmax(g.constant(x)).value.sum(axis=-1)
    assert np.allclose(rows, 1.0, atol=1e-12)


def test_sigmoid_in_open_interval():
    g = Graph()
    y = nx.sigmoid(g.constant(np.linspace(-30, 30, 101))).value
    assert np.all(y > 0.0) and np.all(y < 1.0)


def test_min_subgradient():
    for x, c, expected in ((0.2, 0.7, 1.0), (0.9, 0.7, 0.0), (0.7, 0.7, 1.0)):
        g = Graph()
        xn = g.param([x])
        cn = g.param([c])
        g.backward(nx.total(nx.elementwise_min(xn, cn)))
        assert xn.grad[0] == expected, (x, c, xn.grad)
        assert cn.grad[0] == 1.0 - expected


def test_square_gradient():
    g = Graph()
    x = g.param([3.0])
    g.backward(nx.total(nx.mul(x, x)))
    assert abs(x.grad[0] - 6.0) < 1e-12
    report = check(lambda n: nx.total(nx.mul(n[0], n[0])), np.array([3.0]))
    assert report.max_abs_diff['input0'] < 1e-6


def test_constant_function_has_zero_gradient():
    report = grad_check(lambda n: nx.total(n[0].graph.constant([1.0, 2.0])), [np.array([0.3, -0.4])])
    assert report.max_error == 0.0


def lopsided(x):
    """1000 * x0^2 + 1e-3 * x1 whose backward drops the x1 term"""
    v = x.value

    def backward(g):
        x.accumulate(g * np.array([2000.0 * v[0], 0.0]))

    return x.graph.emit('lopsided', np.array(1000.0 * v[0] ** 2 + 1e-3 * v[1]), (x,), backward)


def test_grad_check_catches_wrong_small_entry():
    report = grad_check(lambda n: lopsided(n[0]), [np.array([1.0, 1.0])], names=['x'])
    assert report.errors['x'] > 0.99
    assert not report.passed(TOLERANCE)
    # the whole-tensor ratio alone would hide it
    assert report.norm_errors['x'] < TOLERANCE


def test_grad_check_elementwise_primitives():
    r = rng(2)
    x = r.normal(size=(3, 4))
    check(lambda n: project(nx.tanh(n[0])), x)
    check(lambda n: project(nx.sigmoid(n[0])), x)
    check(lambda n: project(nx.softmax(n[0])), x)
    check(lambda n: project(nx.softmax(n[0])), r.normal(size=6))
    check(lambda n: project(nx.log(n[0])), r.uniform(0.5, 2.0, size=5))
    check(lambda n: project(nx.scale(n[0], -2.5)), x)


def test_grad_check_products():
    r = rng(3)
    check(lambda n: project(nx.matmul(n[0], n[1])), r.normal(size=(3, 4)), r.normal(size=(4, 2)))
    check(lambda n: project(nx.matmul(n[0], n[1])), r.normal(size=4), r.normal(size=(4, 2)))
    check(lambda n: project(nx.matmul(n[0], n[1])), r.normal(size=(3, 4)), r.normal(size=4))
    check(lambda n: project(nx.matmul(n[0], n[1])), r.normal(size=4), r.normal(size=4))
    check(lambda n: project(nx.affine(n[0], n[1], n[2])), r.normal(size=3), r.normal(size=(3, 5)), r.normal(size=5))
    check(lambda n: project(nx.affine(n[0], n[1], n[2])), r.normal(size=(2, 3)), r.normal(size=(3, 5)), r.normal(size=5))
    check(lambda n: project(nx.outer(n[0], n[1])), r.normal(size=3), r.normal(size=4))
    check(lambda n: project(nx.weighted_sum(n[0], n[1])), r.normal(size=5), r.normal(size=(5, 3)))


def test_grad_check_broadcasting():
    r = rng(4)
    check(lambda n: project(nx.add(n[0], n[1], n[2])), r.normal(size=(3, 4)), r.normal(size=4), r.normal(size=(3, 1)))
    check(lambda n: project(nx.mul(n[0], n[1])), r.normal(size=(3, 4)), r.normal(size=4))


def test_grad_check_structural():
    r = rng(5)
    check(lambda n: project(nx.concat([n[0], n[1]])), r.normal(size=3), r.normal(size=2))
    check(lambda n: project(nx.slice_(n[0], 1, 4)), r.normal(size=6))
    check(lambda n: project(nx.stack([n[0], n[1], n[0]])), r.normal(size=3), r.normal(size=3))
    check(lambda n: project(nx.embed_lookup(n[0], [2, 0, 2])), r.normal(size=(4, 3)))
    check(lambda n: project(nx.embed_lookup(n[0], 1)), r.normal(size=(4, 3)))
    check(lambda n: project(nx.scatter_add(n[0], [0, 3, 0, 1], 5)), r.normal(size=4))
    check(lambda n: nx.pick(n[0], 2), r.normal(size=4))
    check(lambda n: nx.mean([nx.pick(n[0], 0), nx.pick(n[0], 3), nx.total(n[0])]), r.normal(size=4))


def test_grad_check_min_and_mix():
    r = rng(6)
    a = r.uniform(size=6)
    b = a + r.choice([-0.5, 0.5], size=6)
    check(lambda n: project(nx.elementwise_min(n[0], n[1])), a, b)
    check(lambda n: project(nx.scalar_mix(0.3, n[0], n[1])), r.normal(size=5), r.normal(size=5))
    check(lambda n: project(nx.scalar_mix(nx.sigmoid(n[0]), n[1], n[2])),
          r.normal(size=1), r.normal(size=5), r.normal(size=5))


def test_grad_check_lstm_cell():
    r = rng(7)
    hidden, n_in = 3, 2
    check(lambda n: project(nx.lstm_cell(n[0], n[1], n[2], n[3])),
          r.normal(size=n_in), r.normal(size=2 * hidden),
          r.normal(scale=0.5, size=(n_in + hidden, 4 * hidden)), r.normal(scale=0.5, size=4 * hidden))


def test_grad_check_chain_of_lstm_steps():
    r = rng(8)

    def f(n):
        state = n[0].graph.constant(np.zeros(4))
        for t in range(3):
            state = nx.lstm_cell(nx.embed_lookup(n[1], t), state, n[2], n[3])
        return project(nx.softmax(state))

    check(f, np.zeros(1), r.normal(size=(3, 2)), r.normal(scale=0.5, size=(4, 8)), r.normal(scale=0.5, size=8))


def test_shape_errors_name_the_op():
    g = Graph()
    cases = [
        (lambda: nx.matmul(g.constant(np.ones((2, 3))), g.constant(np.ones((2, 3)))), 'matmul'),
        (lambda: nx.elementwise_min(g.constant(np.ones(2)), g.constant(np.ones(3))), 'elementwise_min'),
        (lambda: nx.weighted_sum(g.constant(np.ones(2)), g.constant(np.ones((3, 4)))), 'weighted_sum'),
        (lambda: nx.add(g.constant(np.ones(2)), g.constant(np.ones(3))), 'add'),
    ]
    for build, op in cases:
        try:
            build()
        except ShapeError as e:
            assert e.op == op and op in str(e)
            continue
        raise AssertionError(f"{op} accepted mismatched shapes")


def test_non_finite_values_rejected():
    g = Graph()
    try:
        with np.errstate(over='ignore'):
            nx.scale(g.param([10.0]), 1e308)
    except NonFiniteError:
        pass
    else:
        raise AssertionError("overflow not detected")
    try:
        g.param([np.nan])
    except NonFiniteError:
        return
    raise AssertionError("NaN parameter accepted")


def test_log_is_floored():
    g = Graph()
    x = g.param([0.0, 1.0])
    y = nx.log(x)
    assert abs(y.value[0] - np.log(nx.LOG_FLOOR)) < 1e-12
    g.backward(nx.total(y))
    assert x.grad[0] == 0.0 and x.grad[1] == 1.0


def test_deterministic_values():
    def run():
        g = Graph()
        r = rng(9)
        x = g.param(r.normal(size=(4, 3)))
        W = g.param(r.normal(size=(3, 5)))
        out = nx.total(nx.softmax(nx.tanh(nx.matmul(x, W))))
        g.backward(out)
        return out.value.tobytes(), W.grad.tobytes()

    assert run() == run()


def test_inference_graph_records_nothing():
    g = Graph(record=False)
    x = g.param([1.0, 2.0])
    nx.total(nx.tanh(x))
    assert g.nodes == []
    assert not x.requires_grad


def main():
    tests = [(name, fn) for name, fn in sorted(globals().items()) if name.startswith('test_') and callable(fn)]
    failed = 0
    for name, fn in tests:
        try:
            fn()
            print(f"✅ {name}")
        except Exception as e:
            failed += 1
            print(f"❌ {name}: {e!r}")
    print(f"\n{len(tests) - failed}/{len(tests)} passed")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
