"""Closed-form KL terms of the spike-and-slab negative ELBO.

Every function accepts floats, arrays or autodiff nodes for the variational
parameters and returns a :class:`~ssbnn.autodiff.Node`, so the same code
serves evaluation and training. Prior hyperparameters are plain floats.

Gamma and inverse-gamma priors use the shape/rate convention:
``G(a, b)`` has density ``b^a x^(a-1) e^(-b x) / Gamma(a)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from . import autodiff as ad

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class LogNormalParams:
    """``log X ~ N(mu, sigma^2)``. Fields may be floats, arrays or nodes."""

    mu: Any
    sigma: Any

    def __post_init__(self):
        s = self.sigma.value if isinstance(self.sigma, ad.Node) else np.asarray(self.sigma)
        if not np.all(s > 0):
            raise ValueError("LogNormalParams: sigma must be positive")


@dataclass(frozen=True)
class GammaParams:
    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValueError(f"shape and rate must be positive, got {self.shape}, {self.rate}")


InvGammaParams = GammaParams


def _val(x) -> np.ndarray:
    return x.value if isinstance(x, ad.Node) else np.asarray(x, dtype=np.float64)


def _xlogy_ratio(p, q: float):
    """``p * log(p / q)`` with ``0 log 0 = 0``; ``p`` is a node."""
    mask = (p.value > 0).astype(np.float64)
    inner = ad.log(p + (1.0 - mask)) - math.log(q)
    return p * inner * mask


def kl_bernoulli(gamma, lam: float) -> ad.Node:
    """KL(Ber(gamma) || Ber(lam)), elementwise."""
    gamma = ad.as_node(gamma)
    g = gamma.value
    if not np.all((g >= 0) & (g <= 1)):
        raise ValueError("kl_bernoulli: gamma must lie in [0, 1]")
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"kl_bernoulli: lambda must lie in (0, 1], got {lam} (infinite KL)")
    if lam == 1.0:
        if np.any(g < 1.0):
            raise ValueError("kl_bernoulli: lambda = 1 requires gamma = 1 (infinite KL)")
        return ad.mul(gamma, 0.0)
    return _xlogy_ratio(gamma, lam) + _xlogy_ratio(1.0 - gamma, 1.0 - lam)


def kl_bernoulli_logits(logits, lam: float) -> ad.Node:
    """KL(Ber(sigmoid(logits)) || Ber(lam)), stable in the logits."""
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"kl_bernoulli_logits: lambda must lie in (0, 1], got {lam}")
    gamma = ad.sigmoid(logits)
    log_g = -ad.softplus(-ad.as_node(logits))
    if lam == 1.0:
        if np.any(gamma.value < 1.0):
            raise ValueError("kl_bernoulli_logits: lambda = 1 requires gamma = 1 (infinite KL)")
        return gamma * log_g
    log_1mg = -ad.softplus(logits)
    return gamma * (log_g - math.log(lam)) + (1.0 - gamma) * (log_1mg - math.log1p(-lam))


def gaussian_kl(mu, sigma, prior_var) -> ad.Node:
    """KL(N(mu, sigma^2) || N(0, prior_var)) summed over the last axis."""
    mu, sigma = ad.as_node(mu), ad.as_node(sigma)
    var = ad.square(sigma)
    terms = 0.5 * (ad.log(prior_var) - ad.log(var)) + (var + ad.square(mu)) / (2.0 * prior_var) - 0.5
    return ad.sum(terms, axis=-1)


def expected_kl_gaussian_slab_gl(mu, sigma, sigma0_sq: float, tau: LogNormalParams) -> ad.Node:
    """E_{tau^2 ~ LN}[KL(N(mu, diag sigma^2) || N(0, sigma0^2 tau^2 I))].

    ``mu``/``sigma`` may be stacked rows of shape ``(nodes, dim)`` with one
    ``tau`` per row; the result then has shape ``(nodes,)``.
    """
    if not sigma0_sq > 0:
        raise ValueError("sigma0_sq must be positive")
    mu, sigma = ad.as_node(mu), ad.as_node(sigma)
    if mu.shape != sigma.shape:
        raise ad.ShapeError("expected_kl_gaussian_slab_gl", mu.shape, sigma.shape)
    if not np.all(sigma.value > 0):
        raise ValueError("slab scales must be positive")
    t_mu, t_sig = ad.as_node(tau.mu), ad.as_node(tau.sigma)
    inv_scale = ad.exp(-t_mu + 0.5 * ad.square(t_sig))
    if mu.ndim > 1:
        t_mu = ad.reshape(t_mu, t_mu.shape + (1,))
        inv_scale = ad.reshape(inv_scale, inv_scale.shape + (1,))
    var = ad.square(sigma)
    terms = (
        0.5 * (math.log(sigma0_sq) - ad.log(var) + t_mu)
        + (var + ad.square(mu)) / (2.0 * sigma0_sq) * inv_scale
        - 0.5
    )
    return ad.sum(terms, axis=-1)


def kl_lognormal_gamma(q: LogNormalParams, p: GammaParams) -> ad.Node:
    mu, sig = ad.as_node(q.mu), ad.as_node(q.sigma)
    a, b = p.shape, p.rate
    return (
        math.lgamma(a) - a * math.log(b) - a * mu
        + b * ad.exp(mu + 0.5 * ad.square(sig))
        - ad.log(sig) - HALF_LOG_2PI - 0.5
    )


def kl_lognormal_invgamma(q: LogNormalParams, p: InvGammaParams) -> ad.Node:
    mu, sig = ad.as_node(q.mu), ad.as_node(q.sigma)
    a, b = p.shape, p.rate
    return (
        math.lgamma(a) - a * math.log(b) + a * mu
        + b * ad.exp(-mu + 0.5 * ad.square(sig))
        - ad.log(sig) - HALF_LOG_2PI - 0.5
    )


def expected_kl_lognormal_gamma_random_rate(
    tau: LogNormalParams, k_l: int, vs: LogNormalParams
) -> ad.Node:
    """E_{vs^2 ~ LN}[KL(LN(tau) || G(k_l/2 + 1, vs^2 / 2))]."""
    if k_l < 1:
        raise ValueError(f"k_l must be >= 1, got {k_l}")
    t_mu, t_sig = ad.as_node(tau.mu), ad.as_node(tau.sigma)
    v_mu, v_sig = ad.as_node(vs.mu), ad.as_node(vs.sigma)
    a = (k_l + 2) / 2.0
    return (
        a * (math.log(2.0) - t_mu - v_mu)
        + math.lgamma(a)
        + 0.5 * ad.exp(t_mu + 0.5 * ad.square(t_sig) + v_mu + 0.5 * ad.square(v_sig))
        - ad.log(t_sig) - HALF_LOG_2PI - 0.5
    )


def expected_kl_gaussian_slab_ghs(
    mu,
    sigma,
    sigma0_sq: float,
    creg_sq: float,
    beta: LogNormalParams,
    alpha: LogNormalParams,
    zeta_b: LogNormalParams,
    zeta_a: LogNormalParams,
) -> ad.Node:
    """Expected slab KL under the regularized horseshoe scale.

    The prior variance is ``sigma0^2 c^2 T / (c^2 + T)`` with
    ``T = beta alpha zeta_b zeta_a``. ``E[log(c^2 + T)]`` has no closed form
    and is replaced by ``log(c^2 + E[T])``.
    """
    if not creg_sq > 0:
        raise ValueError("creg_sq must be positive")
    if not sigma0_sq > 0:
        raise ValueError("sigma0_sq must be positive")
    mu, sigma = ad.as_node(mu), ad.as_node(sigma)
    if mu.shape != sigma.shape:
        raise ad.ShapeError("expected_kl_gaussian_slab_ghs", mu.shape, sigma.shape)
    if not np.all(sigma.value > 0):
        raise ValueError("slab scales must be positive")
    m = ad.as_node(beta.mu) + alpha.mu + zeta_b.mu + zeta_a.mu
    s2 = (
        ad.square(ad.as_node(beta.sigma)) + ad.square(ad.as_node(alpha.sigma))
        + ad.square(ad.as_node(zeta_b.sigma)) + ad.square(ad.as_node(zeta_a.sigma))
    )
    log_norm = ad.log(creg_sq + ad.exp(m + 0.5 * s2))
    inv_scale = ad.exp(-m + 0.5 * s2) + 1.0 / creg_sq
    if mu.ndim > 1:
        m = ad.reshape(m, m.shape + (1,))
        log_norm = ad.reshape(log_norm, log_norm.shape + (1,))
        inv_scale = ad.reshape(inv_scale, inv_scale.shape + (1,))
    var = ad.square(sigma)
    terms = (
        0.5 * (math.log(sigma0_sq) + math.log(creg_sq) - ad.log(var) + m - log_norm)
        + (var + ad.square(mu)) / (2.0 * sigma0_sq) * inv_scale
        - 0.5
    )
    return ad.sum(terms, axis=-1)
