"""Spike-and-slab variational linear layer.

Weights are stored as one ``(fan_out, fan_in + 1)`` block per layer with the
bias in column 0, so each row is the whole incoming group of a node and
pruning a node removes its bias too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .kl import (
    GammaParams,
    LogNormalParams,
    expected_kl_gaussian_slab_ghs,
    expected_kl_gaussian_slab_gl,
    expected_kl_lognormal_gamma_random_rate,
    gaussian_kl,
    kl_bernoulli_logits,
    kl_lognormal_gamma,
    kl_lognormal_invgamma,
)
from .priors import RHO_INIT, GlobalScaleState, PriorSpec
from .sampling import (
    RelaxationConfig,
    SeededRng,
    relaxed_bernoulli_from_logits,
    sample_gaussian_reparam,
    sample_lognormal,
    softplus_transform,
)

GAMMA_INIT = 0.99
LOCAL_MU_RANGE = 0.6
PARAMETERIZATIONS = ("centered", "non-centered")

LOCAL_PARAM_NAMES = {
    "ss-ig": (),
    "ss-gl": ("tau_mu", "tau_rho"),
    "ss-ghs": ("beta_mu", "beta_rho", "alpha_mu", "alpha_rho"),
}


@dataclass
class LayerVariationalState:
    fan_in: int
    fan_out: int
    is_output: bool
    mu: ad.Node
    rho: ad.Node
    gamma_logit: ad.Node | None
    local: dict[str, ad.Node] = field(default_factory=dict)

    def parameters(self) -> list[ad.Node]:
        params = [self.mu, self.rho]
        if self.gamma_logit is not None:
            params.append(self.gamma_logit)
        params.extend(self.local.values())
        return params

    @property
    def sigma(self) -> ad.Node:
        return softplus_transform(self.rho)

    @property
    def gamma(self) -> np.ndarray:
        """Variational inclusion probabilities (all ones on the output layer)."""
        if self.gamma_logit is None:
            return np.ones(self.fan_out)
        return ad.sigmoid(self.gamma_logit.value).value

    def local_lognormal(self, prefix: str) -> LogNormalParams:
        return LogNormalParams(self.local[f"{prefix}_mu"],
                               softplus_transform(self.local[f"{prefix}_rho"]))


@dataclass
class SampledLayer:
    W: ad.Node
    z: np.ndarray
    z_tilde: ad.Node | None
    scales: dict[str, ad.Node] = field(default_factory=dict)


def init_layer(fan_in: int, fan_out: int, prior: PriorSpec, is_output: bool,
               rng: SeededRng) -> LayerVariationalState:
    if fan_in < 1 or fan_out < 1:
        raise ValueError(f"layer dimensions must be >= 1, got {fan_in}x{fan_out}")
    bound = math.sqrt(6.0 / fan_in)
    shape = (fan_out, fan_in + 1)
    mu = ad.parameter(rng.uniform_range(-bound, bound, shape), name="mu")
    rho = ad.parameter(np.full(shape, RHO_INIT), name="rho")
    gamma_logit = None
    if not is_output:
        logit = math.log(GAMMA_INIT) - math.log1p(-GAMMA_INIT)
        gamma_logit = ad.parameter(np.full(fan_out, logit), name="gamma_logit")
    local = {}
    for name in LOCAL_PARAM_NAMES[prior.kind]:
        if name.endswith("_mu"):
            value = rng.uniform_range(-LOCAL_MU_RANGE, LOCAL_MU_RANGE, fan_out)
        else:
            value = np.full(fan_out, RHO_INIT)
        local[name] = ad.parameter(value, name=name)
    return LayerVariationalState(fan_in, fan_out, is_output, mu, rho, gamma_logit, local)


def regularized_local_scale(beta, alpha, zeta_a, zeta_b, creg_sq: float):
    """``c^2 beta alpha / (c^2 + beta alpha zeta_a zeta_b)``."""
    ba = beta * alpha
    return creg_sq * ba / (creg_sq + ba * zeta_a * zeta_b)


def sample_layer(
    state: LayerVariationalState,
    prior: PriorSpec,
    cfg: RelaxationConfig,
    parameterization: str,
    rng: SeededRng,
    global_draws: dict[str, ad.Node] | None = None,
) -> SampledLayer:
    """Draw weights, node indicators and scales for one Monte Carlo pass.

    ``global_draws`` carries the shared scale samples of the pass; it is only
    consulted for the non-centered horseshoe.
    """
    if prior.kind not in LOCAL_PARAM_NAMES:
        raise ValueError(f"unknown prior kind {prior.kind!r}")
    if parameterization not in PARAMETERIZATIONS:
        raise ValueError(f"unknown parameterization {parameterization!r}")
    slab = sample_gaussian_reparam(state.mu, state.sigma, rng)

    if state.gamma_logit is None:
        z, z_node = np.ones(state.fan_out), None
    else:
        z_node, z = relaxed_bernoulli_from_logits(state.gamma_logit, cfg, rng)

    scales: dict[str, ad.Node] = {}
    if prior.kind == "ss-gl":
        q = state.local_lognormal("tau")
        scales["tau_sq"] = sample_lognormal(q.mu, q.sigma, rng)
    elif prior.kind == "ss-ghs":
        qb, qa = state.local_lognormal("beta"), state.local_lognormal("alpha")
        scales["beta"] = sample_lognormal(qb.mu, qb.sigma, rng)
        scales["alpha"] = sample_lognormal(qa.mu, qa.sigma, rng)

    rows = slab
    if parameterization == "non-centered" and prior.kind != "ss-ig":
        if prior.kind == "ss-gl":
            scale_sq = scales["tau_sq"]
        else:
            if not global_draws or "zeta_a" not in global_draws:
                raise ValueError("non-centered horseshoe sampling needs the global zeta draws")
            za, zb = global_draws["zeta_a"], global_draws["zeta_b"]
            tau_tilde_sq = regularized_local_scale(scales["beta"], scales["alpha"], za, zb,
                                                   prior.creg_sq)
            scales["tau_tilde_sq"] = tau_tilde_sq
            scale_sq = tau_tilde_sq * za * zb
        scales["tau_star"] = ad.sqrt(scale_sq)
        rows = ad.reshape(scales["tau_star"], (state.fan_out, 1)) * rows

    if z_node is not None:
        # +0.0 normalizes the sign of zeros on pruned rows
        rows = ad.reshape(z_node, (state.fan_out, 1)) * rows + 0.0
    return SampledLayer(rows, z, z_node, scales)


def layer_forward(x, sampled: SampledLayer) -> ad.Node:
    """Affine map ``x W[:, 1:]^T + W[:, 0]``; no activation."""
    x = ad.as_node(x)
    W = sampled.W
    fan_in = W.shape[1] - 1
    if x.ndim != 2 or x.shape[1] != fan_in:
        raise ad.ShapeError("layer_forward", x.shape, W.shape,
                            detail=f"input width must be {fan_in}")
    return x @ ad.transpose(W[:, 1:]) + W[:, 0]


def slab_kl(state: LayerVariationalState, prior: PriorSpec, global_state: GlobalScaleState | None,
            parameterization: str = "centered") -> ad.Node:
    """Per-node expected slab KL, shape ``(fan_out,)``."""
    sigma = state.sigma
    if prior.kind == "ss-ig" or parameterization == "non-centered":
        return gaussian_kl(state.mu, sigma, prior.sigma0_sq)
    if prior.kind == "ss-gl":
        return expected_kl_gaussian_slab_gl(state.mu, sigma, prior.sigma0_sq,
                                            state.local_lognormal("tau"))
    g = _require_globals(global_state, prior)
    return expected_kl_gaussian_slab_ghs(
        state.mu, sigma, prior.sigma0_sq, prior.creg_sq,
        state.local_lognormal("beta"), state.local_lognormal("alpha"),
        g.lognormal("zb"), g.lognormal("za"),
    )


def local_scale_kl(state: LayerVariationalState, prior: PriorSpec,
                   global_state: GlobalScaleState | None) -> ad.Node:
    if prior.kind == "ss-gl":
        g = _require_globals(global_state, prior)
        per_node = expected_kl_lognormal_gamma_random_rate(
            state.local_lognormal("tau"), state.fan_in, g.lognormal("vs"))
    elif prior.kind == "ss-ghs":
        per_node = (kl_lognormal_invgamma(state.local_lognormal("beta"), GammaParams(0.5, 1.0))
                    + kl_lognormal_gamma(state.local_lognormal("alpha"), GammaParams(0.5, 1.0)))
    else:
        return ad.constant(0.0)
    return ad.sum(per_node)


def layer_kl(
    state: LayerVariationalState,
    prior: PriorSpec,
    lam: float,
    global_state: GlobalScaleState | None = None,
    parameterization: str = "centered",
) -> ad.Node:
    """Inclusion-weighted slab KL + indicator KL + local-scale KL of one layer.

    Shared (global) scale terms are not included.
    """
    slab = slab_kl(state, prior, global_state, parameterization)
    local = local_scale_kl(state, prior, global_state)
    if state.gamma_logit is None:
        return ad.sum(slab) + local
    gamma = ad.sigmoid(state.gamma_logit)
    bern = kl_bernoulli_logits(state.gamma_logit, lam)
    return ad.sum(gamma * slab) + ad.sum(bern) + local


def active_nodes(state: LayerVariationalState, threshold: float = 0.5) -> np.ndarray:
    return (state.gamma > threshold).astype(np.int64)


def _require_globals(global_state, prior) -> GlobalScaleState:
    if global_state is None or global_state.kind != prior.kind:
        raise ValueError(f"{prior.kind} layer KL needs the matching global scale state")
    return global_state
