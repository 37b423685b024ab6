import math

import numpy as np
import pytest
from mpmath import mp

from ssbnn import autodiff as ad
from conftest import central_diff


class TestForward:
    def test_sigmoid_symmetry_point(self):
        assert ad.sigmoid(0.0).item() == 0.5

    def test_swish_zero(self):
        assert ad.swish(0.0).item() == 0.0

    def test_log_sum_exp_large_inputs(self):
        mp.dps = 40
        expected = float(mp.log(mp.exp(1000) + mp.exp(1000)))
        got = ad.log_sum_exp(np.array([1000.0, 1000.0])).item()
        assert got == pytest.approx(expected, rel=1e-15)
        assert got == pytest.approx(1000.6931471805599, abs=1e-10)

    def test_sigmoid_extremes_are_exact(self):
        v = ad.sigmoid(np.array([-800.0, 800.0])).value
        np.testing.assert_array_equal(v, [0.0, 1.0])

    def test_softplus_matches_log1p_exp(self):
        x = np.linspace(-30, 30, 61)
        np.testing.assert_allclose(ad.softplus(x).value, np.log1p(np.exp(x)), rtol=1e-14)

    def test_maximum(self):
        np.testing.assert_array_equal(ad.maximum(np.array([1.0, 5.0]), np.array([3.0, 2.0])).value,
                                      [3.0, 5.0])

    def test_scalar_broadcast(self):
        x = ad.parameter(np.ones((2, 3)))
        np.testing.assert_array_equal((x * 2.0).value, np.full((2, 3), 2.0))


class TestShapeErrors:
    def test_matmul_inner_mismatch_names_primitive_and_shapes(self):
        with pytest.raises(ad.ShapeError) as exc:
            ad.matmul(np.ones((2, 3)), np.ones((4, 5)))
        msg = str(exc.value)
        assert "matmul" in msg and "(2, 3)" in msg and "(4, 5)" in msg

    def test_elementwise_mismatch(self):
        with pytest.raises(ad.ShapeError) as exc:
            ad.add(np.ones(3), np.ones(4))
        assert "add" in str(exc.value)

    def test_backward_requires_scalar_root(self):
        x = ad.parameter(np.ones(3))
        with pytest.raises(ValueError):
            ad.backward(x * 2.0)


class TestBackward:
    def test_sum_of_squares(self):
        x = ad.parameter(np.array([1.0, 2.0, 3.0]))
        ad.backward(ad.sum(ad.square(x)))
        np.testing.assert_array_equal(x.grad, [2.0, 4.0, 6.0])

    def test_sigmoid_times_constant(self):
        w = ad.parameter(0.0)
        ad.backward(ad.sigmoid(w) * 4.0)
        assert w.grad == pytest.approx(1.0, abs=1e-15)
        fd = central_diff(lambda v: 4.0 / (1.0 + math.exp(-float(v))), np.array(0.0))
        assert w.grad == pytest.approx(float(fd), rel=1e-8)

    def test_fan_out_sums_contributions(self):
        x = ad.parameter(3.0)
        ad.backward(x + x)
        assert x.grad == 2.0

    def test_repeated_backward_accumulates(self):
        x = ad.parameter(np.array([1.0, -2.0]))
        for _ in range(2):
            ad.backward(ad.sum(x * 3.0))
        np.testing.assert_array_equal(x.grad, [6.0, 6.0])

    def test_zero_grad_resets_exactly(self):
        x = ad.parameter(np.array([1.0, -2.0]))
        ad.backward(ad.sum(ad.exp(x)))
        ad.zero_grad([x])
        np.testing.assert_array_equal(x.grad, [0.0, 0.0])

    def test_straight_through_forward_hard_backward_soft(self):
        s = ad.parameter(np.array([0.3, 0.8]))
        out = ad.straight_through(np.array([0.0, 1.0]), s)
        np.testing.assert_array_equal(out.value, [0.0, 1.0])
        ad.backward(ad.sum(out * np.array([2.0, 5.0])))
        np.testing.assert_array_equal(s.grad, [2.0, 5.0])

    def test_getitem_scatter(self):
        x = ad.parameter(np.arange(6.0).reshape(2, 3))
        ad.backward(ad.sum(x[np.array([0, 1, 1]), np.array([2, 0, 0])]))
        np.testing.assert_array_equal(x.grad, [[0, 0, 1], [2, 0, 0]])


UNARY = [
    ("exp", ad.exp, lambda v: v),
    ("log", ad.log, lambda v: np.abs(v) + 0.5),
    ("sigmoid", ad.sigmoid, lambda v: v),
    ("swish", ad.swish, lambda v: v),
    ("softplus", ad.softplus, lambda v: v),
    ("square", ad.square, lambda v: v),
    ("sqrt", ad.sqrt, lambda v: np.abs(v) + 0.5),
    ("neg", ad.neg, lambda v: v),
]


def _random_expression(rng, x, y, M):
    """A composite over all primitives; the draw fixes the structure."""
    name, f, dom = UNARY[rng.integers(len(UNARY))]
    a = f(ad.as_node(x) * 0.5 + 0.0) if name not in ("log", "sqrt") else f(ad.square(x) + 0.5)
    b = ad.maximum(x, y * 0.7) / (ad.square(y) + 1.0)
    c = ad.matmul(M, ad.reshape(x - y, (3, 1)))
    pieces = [ad.sum(a), ad.mean(b), ad.log_sum_exp(c), ad.sum(ad.sigmoid(ad.transpose(c)))]
    total = pieces[0]
    for p in pieces[1:]:
        total = total + p * float(rng.uniform(0.5, 1.5))
    return total


@pytest.mark.parametrize("trial", range(100))
def test_composite_gradients_match_central_differences(trial):
    rng = np.random.default_rng(trial)
    x0, y0 = rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 3)
    M0 = rng.uniform(-2, 2, (2, 3))
    # nudge away from kinks of maximum
    y0 = np.where(np.abs(x0 - 0.7 * y0) < 1e-3, y0 + 0.01, y0)
    seed = int(rng.integers(1 << 30))

    def value(xv, yv, Mv):
        return _random_expression(np.random.default_rng(seed), xv, yv, Mv).item()

    x, y, M = ad.parameter(x0), ad.parameter(y0), ad.parameter(M0)
    ad.backward(_random_expression(np.random.default_rng(seed), x, y, M))
    for node, fd in ((x, central_diff(lambda v: value(v, y0, M0), x0)),
                     (y, central_diff(lambda v: value(x0, v, M0), y0)),
                     (M, central_diff(lambda v: value(x0, y0, v), M0))):
        err = np.abs(node.grad - fd) / np.maximum(1.0, np.abs(fd))
        assert err.max() < 1e-6


@pytest.mark.parametrize("name,f,dom", UNARY)
def test_unary_gradients(name, f, dom, rng):
    x0 = dom(rng.uniform(-2, 2, 5))
    x = ad.parameter(x0)
    ad.backward(ad.sum(f(x)))
    fd = central_diff(lambda v: f(v).value.sum(), x0)
    np.testing.assert_allclose(x.grad, fd, rtol=1e-6, atol=1e-8)
