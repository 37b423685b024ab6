import math

import numpy as np
import pytest

from ssbnn import autodiff as ad
from ssbnn.sampling import (
    RelaxationConfig,
    SeededRng,
    relaxed_bernoulli_from_logits,
    sample_gaussian_reparam,
    sample_gumbel_softmax,
    sample_lognormal,
    softplus_transform,
)

N = 100_000


class TestSeededRng:
    def test_same_seed_and_stream_is_bitwise_equal(self):
        a, b = SeededRng(7, 3), SeededRng(7, 3)
        np.testing.assert_array_equal(a.normal(1000), b.normal(1000))

    def test_streams_differ(self):
        assert not np.array_equal(SeededRng(7, 1).normal(10), SeededRng(7, 2).normal(10))

    def test_stream_independent_of_consumption_order(self):
        a = SeededRng(7, 2).normal(5)
        other = SeededRng(7, 1)
        other.normal(100)
        np.testing.assert_array_equal(SeededRng(7, 2).normal(5), a)

    def test_state_round_trip(self):
        r = SeededRng(3, (1, 2))
        r.normal(17)
        clone = SeededRng.from_state(r.state)
        np.testing.assert_array_equal(r.uniform(9), clone.uniform(9))


class TestGaussian:
    def test_zero_scale_returns_mu(self):
        mu = np.array([1.5, -2.0])
        out = sample_gaussian_reparam(mu, np.zeros(2), SeededRng(0, 0))
        np.testing.assert_array_equal(out.value, mu)

    def test_fixed_noise(self):
        out = sample_gaussian_reparam(0.0, 1.0, SeededRng(0, 0), noise=1.5)
        assert out.item() == 1.5

    def test_negative_scale_rejected(self):
        with pytest.raises(ValueError):
            sample_gaussian_reparam(np.zeros(2), np.array([1.0, -0.1]), SeededRng(0, 0))

    def test_mc_mean(self):
        out = sample_gaussian_reparam(np.full(N, 2.0), np.full(N, 3.0), SeededRng(1, 0))
        assert abs(out.value.mean() - 2.0) < 3 * 3 / math.sqrt(N)

    def test_gradient_reaches_mu_and_sigma(self):
        mu, sigma = ad.parameter(np.array([0.5])), ad.parameter(np.array([2.0]))
        ad.backward(ad.sum(sample_gaussian_reparam(mu, sigma, SeededRng(0, 0), noise=0.25)))
        assert mu.grad[0] == 1.0 and sigma.grad[0] == 0.25


class TestLogNormal:
    def test_zero_noise_is_median(self):
        assert sample_lognormal(0.7, 0.3, SeededRng(0, 0), noise=0.0).item() == math.exp(0.7)

    def test_nonpositive_sigma_rejected(self):
        for s in (0.0, -1.0):
            with pytest.raises(ValueError):
                sample_lognormal(0.0, s, SeededRng(0, 0))

    def test_mc_mean(self):
        draws = sample_lognormal(np.zeros(N), np.full(N, 0.5), SeededRng(2, 0)).value
        se = draws.std(ddof=1) / math.sqrt(N)
        assert abs(draws.mean() - math.exp(0.125)) < 3 * se

    def test_log_is_gaussian(self):
        logs = np.log(sample_lognormal(np.zeros(N), np.full(N, 0.5), SeededRng(3, 0)).value)
        z = (logs - logs.mean()) / logs.std()
        skew, kurt = np.mean(z ** 3), np.mean(z ** 4) - 3.0
        jb = N / 6.0 * (skew ** 2 + kurt ** 2 / 4.0)
        assert jb < 13.8  # chi-square(2) 0.999 quantile


class TestGumbelSoftmax:
    def test_median_noise(self):
        cfg = RelaxationConfig(hard_forward=False)
        z_soft, _ = sample_gumbel_softmax(0.5, cfg, SeededRng(0, 0), u=0.5)
        assert z_soft.item() == 0.5

    def test_median_noise_gives_logit_gamma(self):
        cfg = RelaxationConfig(temperature=1.0, hard_forward=False)
        z_soft, _ = sample_gumbel_softmax(0.8, cfg, SeededRng(0, 0), u=0.5)
        assert z_soft.item() == pytest.approx(0.8, rel=1e-14)

    def test_low_temperature_saturates(self):
        cfg = RelaxationConfig(temperature=0.01, hard_forward=False)
        z_soft, _ = sample_gumbel_softmax(np.full(10_000, 0.6), cfg, SeededRng(4, 0))
        inside = (z_soft.value > 0.01) & (z_soft.value < 0.99)
        # a draw lands inside only if |logit(u) + logit(0.6)| < 0.046, probability ~1%
        assert inside.mean() < 0.03

    def test_inclusion_frequency(self):
        _, z = sample_gumbel_softmax(np.full(N, 0.7), RelaxationConfig(), SeededRng(5, 0))
        assert abs(z.mean() - 0.7) < 3 * math.sqrt(0.7 * 0.3 / N)

    @pytest.mark.parametrize("gamma", [0.0, 1.0, -0.1, 1.5])
    def test_gamma_outside_open_interval(self, gamma):
        with pytest.raises(ValueError):
            sample_gumbel_softmax(gamma, RelaxationConfig(), SeededRng(0, 0))

    def test_temperature_must_be_positive(self):
        with pytest.raises(ValueError):
            RelaxationConfig(temperature=0.0)

    def test_clamping_keeps_logits_finite(self):
        g = np.array([1e-12 * 1.01, 1 - 1e-12 * 1.01])
        for u in (0.0, 1.0):
            z_soft, _ = sample_gumbel_softmax(g, RelaxationConfig(hard_forward=False),
                                              SeededRng(0, 0), u=np.full(2, u))
            assert np.all(np.isfinite(z_soft.value))

    def test_straight_through_consistency(self):
        logits = ad.parameter(np.array([-0.3, 0.4, 2.0, -1.5]))
        u = np.array([0.2, 0.6, 0.5, 0.9])
        w = np.array([1.0, 2.0, 3.0, 4.0])
        hard, z = relaxed_bernoulli_from_logits(logits, RelaxationConfig(), SeededRng(0, 0), u=u)
        assert set(np.unique(hard.value)) <= {0.0, 1.0}
        np.testing.assert_array_equal(hard.value, z)
        ad.backward(ad.sum(hard * w))
        g_hard = logits.grad.copy()

        logits2 = ad.parameter(logits.value.copy())
        soft, _ = relaxed_bernoulli_from_logits(logits2, RelaxationConfig(hard_forward=False),
                                                SeededRng(0, 0), u=u)
        ad.backward(ad.sum(soft * w))
        np.testing.assert_array_equal(g_hard, logits2.grad)


class TestSoftplus:
    def test_values(self):
        assert softplus_transform(0.0) == pytest.approx(math.log(2.0), rel=1e-15)
        assert softplus_transform(-6.0) == pytest.approx(0.0024756851377303, rel=1e-12)
        assert softplus_transform(50.0) == 50.0
        assert np.isfinite(softplus_transform(1000.0))

    def test_node_and_array_agree(self):
        rho = np.linspace(-40, 40, 17)
        np.testing.assert_array_equal(softplus_transform(rho), softplus_transform(ad.parameter(rho)).value)
