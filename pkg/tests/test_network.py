import math

import numpy as np
import pytest
from scipy import integrate, stats

import gradcheck
from conftest import central_diff
from ssbnn import autodiff as ad
from ssbnn.layers import SampledLayer, layer_kl
from ssbnn.network import (
    NetworkConfig,
    SpikeSlabMLP,
    elbo_terms,
    forward,
    kl_to_truth_diagnostic,
    negative_elbo,
    negative_elbo_kl_total,
    negative_log_likelihood,
    predict_posterior_mean,
    predictive_outputs,
    truth_diagnostic_from_outputs,
)
from ssbnn.priors import PriorSpec, global_kl, init_globals
from ssbnn.sampling import SeededRng


def _sampled(*blocks):
    return [SampledLayer(ad.constant(np.asarray(W, dtype=float)), None, None) for W in blocks]


def _model(kind="ss-gl", widths=(3, 4, 2), likelihood="categorical", seed=0, **kw):
    lambdas = (0.4,) * (len(widths) - 2)
    cfg = NetworkConfig(widths=widths, likelihood=likelihood,
                        prior=PriorSpec(kind, lambdas=lambdas), **kw)
    return SpikeSlabMLP(cfg, SeededRng(seed, 0))


def _deterministic(model):
    """sigma -> 0 and gamma in {0, 1}; the IG prior has no scale noise."""
    for layer in model.layers:
        layer.rho.value = np.full_like(layer.rho.value, -800.0)
        if layer.gamma_logit is not None:
            layer.gamma_logit.value = np.where(np.arange(layer.fan_out) % 3 == 0, -800.0, 800.0)
    return model


class TestConfig:
    def test_needs_a_hidden_layer(self):
        with pytest.raises(ValueError):
            NetworkConfig(widths=(3, 2))

    def test_lambda_count(self):
        with pytest.raises(ValueError):
            NetworkConfig(widths=(3, 4, 4, 2), prior=PriorSpec("ss-gl", lambdas=(0.5,)))

    def test_unknown_activation(self):
        with pytest.raises(ValueError):
            NetworkConfig(widths=(3, 4, 2), prior=PriorSpec(lambdas=(0.5,)), activation="tanh")


class TestForward:
    def test_identity_hidden_layer_gives_affine_map(self, rng):
        x = rng.uniform(0.1, 1.0, size=(5, 3))
        hidden = np.hstack([np.zeros((3, 1)), np.eye(3)])
        out_W = rng.normal(size=(2, 4))
        got = forward(x, _sampled(hidden, out_W), "relu").value
        np.testing.assert_allclose(got, x @ out_W[:, 1:].T + out_W[:, 0], rtol=0, atol=1e-14)

    def test_zero_weights_give_output_bias(self, rng):
        out_W = np.zeros((2, 5))
        out_W[:, 0] = [0.3, -1.2]
        got = forward(rng.normal(size=(4, 3)), _sampled(np.zeros((4, 4)), out_W)).value
        np.testing.assert_array_equal(got, np.tile([0.3, -1.2], (4, 1)))

    def test_matches_straight_line_oracle(self, rng):
        blocks = [rng.normal(size=(4, 4)), rng.normal(size=(3, 5)), rng.normal(size=(2, 4))]
        x = rng.normal(size=(6, 3))
        got = forward(x, _sampled(*blocks), "swish").value
        for b in range(6):
            h = list(x[b])
            for li, W in enumerate(blocks):
                pre = [W[j, 0] + sum(W[j, i + 1] * h[i] for i in range(len(h))) for j in range(W.shape[0])]
                h = pre if li == 2 else [v / (1 + math.exp(-v)) for v in pre]
            np.testing.assert_allclose(got[b], h, rtol=0, atol=1e-12)

    def test_width_mismatch(self, rng):
        with pytest.raises(ad.ShapeError):
            forward(rng.normal(size=(2, 5)), _sampled(np.zeros((4, 4)), np.zeros((2, 5))))


class TestLikelihood:
    def test_regression_at_truth(self):
        eta = np.array([[0.5], [1.5], [-2.0]])
        got = negative_log_likelihood(eta, eta.ravel(), "gaussian").value
        assert got == pytest.approx(3 * 0.5 * math.log(2 * math.pi), rel=1e-15)

    def test_two_class_uniform(self):
        got = negative_log_likelihood(np.zeros((4, 2)), np.array([0, 1, 1, 0]), "categorical").value
        assert got == pytest.approx(4 * math.log(2), rel=1e-15)

    def test_categorical_gradient(self, rng):
        eta = rng.normal(size=(5, 4))
        y = rng.integers(0, 4, size=5)
        node = ad.parameter(eta)
        ad.backward(negative_log_likelihood(node, y, "categorical"))
        num = central_diff(lambda v: negative_log_likelihood(v, y, "categorical").value, eta)
        np.testing.assert_allclose(node.grad, num, rtol=1e-6, atol=1e-9)

    def test_label_out_of_range(self):
        with pytest.raises(ValueError):
            negative_log_likelihood(np.zeros((2, 3)), np.array([0, 3]), "categorical")

    def test_regression_shape_mismatch(self):
        with pytest.raises(ad.ShapeError):
            negative_log_likelihood(np.zeros((3, 1)), np.zeros(4), "gaussian")

    def test_unknown(self):
        with pytest.raises(ValueError):
            negative_log_likelihood(np.zeros((1, 1)), np.zeros(1), "poisson")


class TestKLTotal:
    def test_zero_at_prior(self):
        cfg = NetworkConfig(widths=(2, 3, 1), likelihood="gaussian",
                            prior=PriorSpec("ss-ig", sigma0_sq=1.0, lambdas=(1.0,)))
        model = SpikeSlabMLP(cfg, SeededRng(0))
        for layer in model.layers:
            layer.mu.value = np.zeros_like(layer.mu.value)
            layer.rho.value = np.full_like(layer.rho.value, math.log(math.e - 1))
            if layer.gamma_logit is not None:
                layer.gamma_logit.value = np.full(layer.fan_out, 800.0)
        assert abs(negative_elbo_kl_total(model).value) < 1e-12

    @pytest.mark.parametrize("kind", ["ss-ig", "ss-gl", "ss-ghs"])
    @pytest.mark.parametrize("param", ["centered", "non-centered"])
    def test_additivity(self, kind, param):
        model = _model(kind, widths=(3, 4, 4, 2), parameterization=param)
        parts = sum(float(t.value) for t in model.layer_kls())
        parts += float(global_kl(model.globals, model.prior).value)
        assert float(model.kl().value) == pytest.approx(parts, rel=1e-10, abs=1e-12)

    def test_identical_nodes_double(self):
        prior = PriorSpec("ss-gl", lambdas=(0.3,))
        g = init_globals(prior)
        small = _model("ss-gl", widths=(3, 2, 1)).layers[0]
        big = _model("ss-gl", widths=(3, 4, 1)).layers[0]
        for name, p in (("mu", small.mu), ("rho", small.rho)):
            getattr(big, name).value = np.vstack([p.value, p.value])
        big.gamma_logit.value = np.tile(small.gamma_logit.value, 2)
        for k, v in small.local.items():
            big.local[k].value = np.tile(v.value, 2)
        a = float(layer_kl(small, prior, 0.3, g).value)
        b = float(layer_kl(big, prior, 0.3, g).value)
        assert b == pytest.approx(2 * a, rel=1e-12)

    def test_kind_mismatch(self):
        model = _model("ss-gl")
        model.globals = init_globals(PriorSpec("ss-ghs"))
        with pytest.raises(ValueError):
            negative_elbo_kl_total(model)


class TestNegativeElbo:
    def test_full_batch_single_sample(self, rng):
        model = _model()
        x, y = rng.normal(size=(8, 3)), rng.integers(0, 2, 8)
        eta = forward(x, model.sample(SeededRng(4)), model.config.activation)
        nll = negative_log_likelihood(eta, y, "categorical").value
        got = negative_elbo(model, x, y, n=8, S=1, rng=SeededRng(4)).value
        assert got == pytest.approx(nll + model.kl().value, rel=1e-14)

    def test_doubling_n_doubles_likelihood(self, rng):
        model = _model()
        x, y = rng.normal(size=(8, 3)), rng.integers(0, 2, 8)
        a = elbo_terms(model, x, y, 100, 3, SeededRng(4))
        b = elbo_terms(model, x, y, 200, 3, SeededRng(4))
        assert b.nll.value == 2 * a.nll.value
        assert b.kl.value == a.kl.value

    def test_zero_residual_leaves_kl_plus_constant(self, rng):
        model = _model("ss-ghs", likelihood="gaussian", widths=(2, 3, 1))
        x = rng.normal(size=(5, 2))
        eta = forward(x, model.sample(SeededRng(8)), model.config.activation).value
        got = negative_elbo(model, x, eta.ravel(), n=50, S=1, rng=SeededRng(8)).value
        const = 50 * 0.5 * math.log(2 * math.pi)
        assert got == pytest.approx(model.kl().value + const, rel=1e-12)

    def test_bad_sample_count(self, rng):
        with pytest.raises(ValueError):
            negative_elbo(_model(), rng.normal(size=(2, 3)), np.zeros(2), 2, 0, SeededRng(0))

    @pytest.mark.parametrize("kind", ["ss-ig", "ss-gl", "ss-ghs"])
    @pytest.mark.parametrize("param", ["centered", "non-centered"])
    def test_gradient_matches_finite_differences(self, kind, param):
        assert gradcheck.elbo_gradient_error(gradcheck.toy_model(kind, param)) < 1e-4


class TestExactSparsityPropagation:
    def test_pruned_node_row_and_downstream_column(self, rng):
        model = _model("ss-gl", widths=(3, 5, 4, 2))
        model.layers[0].gamma_logit.value[2] = -800.0
        x = rng.normal(size=(6, 3))

        def out():
            return forward(x, model.sample(SeededRng(3)), "swish").value

        base = out()
        l0, l1 = model.layers[0], model.layers[1]
        l0.mu.value[2] += 5.0
        l0.rho.value[2] += 1.0
        l1.mu.value[:, 3] += 7.0
        l1.rho.value[:, 3] -= 0.5
        assert np.array_equal(out(), base)


class TestPredict:
    def test_deterministic_model(self, rng):
        model = _deterministic(_model("ss-ig", likelihood="gaussian", widths=(3, 6, 1)))
        x = rng.normal(size=(7, 3))
        a = predict_posterior_mean(x, model, 1, SeededRng(0))
        b = predict_posterior_mean(x, model, 100, SeededRng(0))
        c = predict_posterior_mean(x, model, 100, SeededRng(123))
        # every draw is identical; averaging 100 copies differs only by summation roundoff
        np.testing.assert_allclose(a, b, rtol=1e-14, atol=0)
        np.testing.assert_array_equal(b, c)

    def test_classification_returns_labels(self, rng):
        model = _model()
        pred = predict_posterior_mean(rng.normal(size=(9, 3)), model, 4, SeededRng(1))
        assert pred.shape == (9,) and set(pred.tolist()) <= {0, 1}

    def test_monte_carlo_mean_converges(self, rng):
        model = _model("ss-gl", likelihood="gaussian", widths=(2, 4, 1))
        for layer in model.layers:
            layer.rho.value = np.full_like(layer.rho.value, -1.0)
        model.layers[0].gamma_logit.value = np.zeros(4)
        x = rng.normal(size=(3, 2))
        many = predictive_outputs(x, model, 10_000, SeededRng(1))
        few = predict_posterior_mean(x, model, 1000, SeededRng(2))
        se = many.std(axis=0) * math.sqrt(1 / 1000 + 1 / 10_000)
        assert np.all(np.abs(few - many.mean(axis=0)) < 3 * se)


class TestTruthDiagnostic:
    def _pair(self):
        model = _deterministic(_model("ss-ig", likelihood="gaussian", widths=(1, 6, 1)))
        grid = np.linspace(0, 1, 41).reshape(-1, 1)
        student = predict_posterior_mean(grid, model, 1, SeededRng(0)).ravel()
        return model, grid, student

    def test_zero_at_truth(self):
        model, grid, student = self._pair()
        diag = kl_to_truth_diagnostic(model, lambda g: student, grid, S=1)
        assert diag.kl == 0.0 and diag.hellinger_sq == 0.0

    def test_constant_offset(self):
        model, grid, student = self._pair()
        diag = kl_to_truth_diagnostic(model, lambda g: student + 0.7, grid, S=1)
        assert diag.kl == pytest.approx(0.7**2 / 2, rel=1e-12)
        assert diag.hellinger_sq == pytest.approx(1 - math.exp(-0.49 / 8), rel=1e-12)

    def test_matches_quadrature(self):
        model, grid, student = self._pair()
        truth = np.sin(2 * np.pi * grid.ravel())
        diag = kl_to_truth_diagnostic(model, lambda g: np.sin(2 * np.pi * g), grid, S=1)
        kls, hel = [], []
        for t, s in zip(truth, student):
            p0, p1 = stats.norm(t, 1), stats.norm(s, 1)
            lo, hi = min(t, s) - 12, max(t, s) + 12
            kls.append(integrate.quad(lambda v: p0.pdf(v) * (p0.logpdf(v) - p1.logpdf(v)), lo, hi)[0])
            hel.append(integrate.quad(lambda v: 0.5 * (math.sqrt(p0.pdf(v)) - math.sqrt(p1.pdf(v))) ** 2,
                                      lo, hi)[0])
        assert abs(diag.kl - np.mean(kls)) < 1e-3
        assert abs(diag.hellinger_sq - np.mean(hel)) < 1e-3

    def test_from_outputs(self):
        d = truth_diagnostic_from_outputs(np.zeros((2, 1)), np.array([[1.0], [3.0]]))
        assert d.kl == pytest.approx((0.5 + 4.5) / 2)

    def test_classification_rejected(self):
        with pytest.raises(ValueError):
            kl_to_truth_diagnostic(_model(), lambda g: g, np.zeros((2, 3)))
