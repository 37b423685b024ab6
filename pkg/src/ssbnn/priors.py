"""Prior specifications and the network-wide (global) scale parameters."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .kl import GammaParams, LogNormalParams, kl_lognormal_gamma, kl_lognormal_invgamma
from .sampling import SeededRng, sample_lognormal, softplus_transform

PRIOR_KINDS = ("ss-ig", "ss-gl", "ss-ghs")

# init values for the variational scale parameters
RHO_INIT = -6.0
GLOBAL_MU_INIT = 1.0


@dataclass(frozen=True)
class PriorSpec:
    """Prior family plus fixed hyperparameters.

    ``lambdas`` holds one prior inclusion probability per hidden layer; the
    output layer is implicitly fixed at 1.
    """

    kind: str = "ss-gl"
    sigma0_sq: float = 1.0
    a0: float = 4.0
    b0: float = 2.0
    d0_sq: float = 1.0
    creg_sq: float = 1.0
    lambdas: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in PRIOR_KINDS:
            raise ValueError(f"unknown prior kind {self.kind!r}; expected one of {PRIOR_KINDS}")
        for name in ("sigma0_sq", "a0", "b0", "d0_sq", "creg_sq"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        object.__setattr__(self, "lambdas", tuple(float(x) for x in self.lambdas))
        for lam in self.lambdas:
            if not 0.0 < lam <= 1.0:
                raise ValueError(f"inclusion probabilities must lie in (0, 1], got {lam}")

    def layer_lambda(self, index: int, n_layers: int) -> float:
        if index == n_layers - 1:
            return 1.0
        if len(self.lambdas) != n_layers - 1:
            raise ValueError(
                f"prior has {len(self.lambdas)} inclusion probabilities for "
                f"{n_layers - 1} hidden layers"
            )
        return self.lambdas[index]


GLOBAL_PARAM_NAMES = {
    "ss-ig": (),
    "ss-gl": ("vs_mu", "vs_rho"),
    "ss-ghs": ("zb_mu", "zb_rho", "za_mu", "za_rho"),
}


@dataclass
class GlobalScaleState:
    kind: str
    params: dict[str, ad.Node]

    def parameters(self) -> list[ad.Node]:
        return list(self.params.values())

    def lognormal(self, prefix: str) -> LogNormalParams:
        return LogNormalParams(self.params[f"{prefix}_mu"],
                               softplus_transform(self.params[f"{prefix}_rho"]))


def init_globals(prior: PriorSpec) -> GlobalScaleState:
    params = {}
    for name in GLOBAL_PARAM_NAMES[prior.kind]:
        init = GLOBAL_MU_INIT if name.endswith("_mu") else RHO_INIT
        params[name] = ad.parameter(np.float64(init), name=name)
    return GlobalScaleState(prior.kind, params)


def sample_globals(state: GlobalScaleState, rng: SeededRng) -> dict[str, ad.Node]:
    """One draw of every shared scale, keyed by variable name."""
    if state.kind == "ss-gl":
        q = state.lognormal("vs")
        return {"vs_sq": sample_lognormal(q.mu, q.sigma, rng)}
    if state.kind == "ss-ghs":
        zb, za = state.lognormal("zb"), state.lognormal("za")
        return {"zeta_b": sample_lognormal(zb.mu, zb.sigma, rng),
                "zeta_a": sample_lognormal(za.mu, za.sigma, rng)}
    return {}


def global_kl(state: GlobalScaleState, prior: PriorSpec) -> ad.Node:
    if state.kind != prior.kind:
        raise ValueError(f"global state is {state.kind!r} but prior is {prior.kind!r}")
    if prior.kind == "ss-gl":
        return kl_lognormal_gamma(state.lognormal("vs"), GammaParams(prior.a0, prior.b0))
    if prior.kind == "ss-ghs":
        return (kl_lognormal_invgamma(state.lognormal("zb"), GammaParams(0.5, 1.0))
                + kl_lognormal_gamma(state.lognormal("za"), GammaParams(0.5, 1.0 / prior.d0_sq)))
    return ad.constant(0.0)
