import numpy as np
import pytest

from ndprop.autodiff import ShapeError, Tape, grad_check
from ndprop.fuzzy import membership


def test_sigmoid_at_zero():
    t = Tape()
    x = t.leaf(0.0)
    s = t.sigmoid(x)
    assert s.value == 0.5
    assert t.backward(s)[x.id] == pytest.approx(0.25)


def test_min_strict_and_tie():
    t = Tape()
    a, b = t.leaf(0.3), t.leaf(0.7)
    g = t.backward(t.minimum(a, b))
    assert (g[a.id], g.get(b.id, 0.0)) == (1.0, 0.0)
    t = Tape()
    a, b = t.leaf(0.5), t.leaf(0.5)
    out = t.minimum(a, b)
    g = t.backward(out)
    assert out.value == 0.5 and (g[a.id], g[b.id]) == (1.0, 0.0)


def test_reduce_ties_go_to_first():
    t = Tape()
    x = t.leaf([0.2, 0.9, 0.2, 0.9])
    g = t.backward(t.reduce_min(x) + t.reduce_max(x))
    assert np.array_equal(g[x.id], [1.0, 1.0, 0.0, 0.0])


def test_product_rule_and_chain():
    t = Tape()
    x, y = t.leaf(2.0), t.leaf(3.0)
    g = t.backward(x * y)
    assert (g[x.id], g[y.id]) == (3.0, 2.0)
    t = Tape()
    w = t.leaf(0.0)
    g = t.backward(t.sigmoid(w * 1.0))
    assert g[w.id] == pytest.approx(0.25)


def test_fan_out_accumulates():
    t = Tape()
    x = t.leaf(1.5)
    g = t.backward(x * x + x)
    assert g[x.id] == pytest.approx(4.0)


def test_unused_leaf_has_no_gradient():
    t = Tape()
    x, y = t.leaf(1.0), t.leaf(2.0)
    g = t.backward(x * 2.0)
    assert y.id not in g


def test_shape_mismatch():
    t = Tape()
    with pytest.raises(ShapeError):
        t.add(t.leaf(np.ones(3)), t.leaf(np.ones(4)))
    with pytest.raises(ShapeError):
        t.backward(t.leaf(np.ones(2)))


def test_safe_ops_clamp_and_count():
    t = Tape()
    x = t.leaf([0.0, 0.5])
    out = t.log_safe(x)
    assert out.value[0] == pytest.approx(np.log(1e-12))
    assert t.clamp_events == 1
    d = t.div_safe(1.0, t.leaf(0.0))
    assert d.value == pytest.approx(1e12) and t.clamp_events == 2


def test_record_false_refuses_backward():
    t = Tape(record=False)
    x = t.leaf(1.0)
    with pytest.raises(RuntimeError):
        t.backward(x * 2.0)


OPS = {
    "add": lambda t, x: t.sum(x[:3] + x[3:]),
    "sub": lambda t, x: t.sum((x[:3] - x[3:]) * x[:3]),
    "mul": lambda t, x: t.sum(x[:3] * x[3:]),
    "div": lambda t, x: t.sum(t.div_safe(x[:3], x[3:] + 2.0)),
    "min": lambda t, x: t.sum(t.minimum(x[:3], x[3:]) * x[:3]),
    "max": lambda t, x: t.sum(t.maximum(x[:3], x[3:]) * x[3:]),
    "clamp01": lambda t, x: t.sum(t.clamp01(x * 2.0) * x),
    "sigmoid": lambda t, x: t.sum(t.sigmoid(x * 3.0)),
    "tanh": lambda t, x: t.sum(t.tanh(x) * x),
    "log": lambda t, x: t.sum(t.log_safe(x + 1.0)),
    "concat": lambda t, x: t.sum(t.concat([x, x * x]) * np.arange(12.0)),
    "mean": lambda t, x: t.mean(x * x),
    "affine": lambda t, x: t.sum(t.tanh(t.affine(x[:3], t.stack([x[3:], x[3:] * 2.0], axis=1), x[:2]))),
    "affine_rows": lambda t, x: t.sum(t.affine(t.stack([x[:3], x[3:]], axis=0), t.stack([x[:3], x[3:]], axis=1))),
    "gather": lambda t, x: t.sum(t.gather(x, np.array([[0, 1], [1, 5], [5, 5]])) * 1.5),
    "reduce_prod": lambda t, x: t.sum(t.reduce_prod(t.stack([x[:3], x[3:]], axis=1), axis=1)),
    "reduce_min": lambda t, x: t.sum(t.reduce_min(t.stack([x[:3], x[3:]], axis=0), axis=0)),
    "segment_sum": lambda t, x: t.sum(t.segment_sum(x, np.array([0, 0, 1, 2, 2, 2]), 3) * np.array([1.0, 2.0, 3.0])),
}


@pytest.mark.parametrize("name", sorted(OPS))
def test_ops_match_finite_differences(name):
    rng = np.random.default_rng(sorted(OPS).index(name))
    # strictly distinct values in [0.1, 0.45] keep min/max/clamp away from kinks
    point = np.sort(rng.uniform(0.1, 0.45, 6))
    point = rng.permutation(point + np.arange(6) * 1e-3)
    assert grad_check(OPS[name], point) < 1e-6


def test_reduce_prod_with_zero():
    t = Tape()
    x = t.leaf([[0.0, 0.5, 0.4]])
    g = t.backward(t.sum(t.reduce_prod(x, axis=1)))
    assert np.allclose(g[x.id], [[0.2, 0.0, 0.0]])


def test_grad_check_quadratic():
    assert grad_check(lambda t, x: t.sum(x * x * 3.0 + x), [0.3, -1.2, 2.0]) < 1e-8


def test_grad_check_update_then_membership():
    def f(t, x):
        tau, phi, delta = x[0], x[1], x[2]
        mu = t.minimum(1.0 - tau, 1.0 - phi)
        new_phi = t.minimum(phi + mu * delta, 1.0)
        return (tau + 1.0 - new_phi) * 0.5

    assert grad_check(f, [0.2, 0.3, 0.6]) < 1e-6
    t = Tape()
    assert float(f(t, t.leaf([0.2, 0.3, 0.6])).value) == pytest.approx(
        membership(0.2, 0.3 + 0.7 * 0.6))


def test_grad_check_rejects_bad_step():
    with pytest.raises(ValueError):
        grad_check(lambda t, x: t.sum(x), [1.0], h=0.0)


def test_backward_is_replay_deterministic():
    def run():
        t = Tape()
        x = t.leaf(np.linspace(0.1, 0.9, 7))
        y = t.reduce_prod(t.stack([t.sigmoid(x), t.tanh(x)], axis=1), axis=1)
        return t.backward(t.mean(t.log_safe(y)))[x.id]

    assert np.array_equal(run(), run())
