"""Theory-driven rate quantities and layer-wise prior inclusion probabilities.

For a topology with widths ``k_0..k_{L+1}``, node-sparsity bounds ``s_l``
and norm bounds ``B_l`` this evaluates, per layer,

* ``u_l = log n + log L + sum_l log k_l + sum_l log k_{l+1}`` (plus
  ``log c_reg^2`` for the horseshoe),
* ``theta_l = -log(p) + p + 2 log n + 2L + 2 sum_m log B_m`` with
  ``p = lambda_pen * B_l^2 / (k_l + 1)``,
* ``r_l = s_l (k_l + 1) theta_l / n``,

and the contraction radius ``eps_n = sqrt((sum r_l + xi) sum u_l)``. The
sums inside ``u_l`` run over all layers, so ``u_l`` is the same for every
layer. ``log L`` is used as written; the prior-mass argument that motivates
it works with ``log(L + 1)``, which matters only for ``L = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

LAMBDA_FLOOR = 1e-50


@dataclass(frozen=True)
class TopologySpec:
    n: int
    k: tuple[int, ...]
    s: tuple[float, ...] = ()
    B: tuple[float, ...] = ()
    xi: float = 0.0
    t0: float = 1.0
    t0_prime: float = 1.0
    t0_dprime: float = 1.0
    creg_sq: float = 1.0
    C: tuple[float, ...] = ()

    def __post_init__(self):
        k = tuple(int(x) for x in self.k)
        object.__setattr__(self, "k", k)
        if len(k) < 3:
            raise ValueError("k must list k_0..k_{L+1} with L >= 1")
        n_layers = len(k) - 1
        # defaults: s_l = k_{l+1} (no sparsity), B_l = k_l + 1, C_l = 1e-9
        s = tuple(float(x) for x in self.s) or tuple(float(x) for x in k[1:])
        B = tuple(float(x) for x in self.B) or tuple(float(x + 1) for x in k[:-1])
        C = tuple(float(x) for x in self.C) or (1e-9,) * n_layers
        for name, vec in (("s", s), ("B", B), ("C", C)):
            if len(vec) != n_layers:
                raise ValueError(f"{name} needs {n_layers} entries (one per layer), got {len(vec)}")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        if self.n < 1 or any(x < 1 for x in k):
            raise ValueError("n and all widths must be positive")
        if any(x <= 0 for x in s + B):
            raise ValueError("s and B must be positive")
        if any(sl > kl for sl, kl in zip(s, k[1:])):
            raise ValueError("s_l must not exceed k_{l+1}")
        if any(c < 0 for c in C):
            raise ValueError("C_l must be non-negative")
        if self.xi < 0:
            raise ValueError("xi must be non-negative")
        for name in ("t0", "t0_prime", "t0_dprime", "creg_sq"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def L(self) -> int:
        return len(self.k) - 2

    @property
    def n_layers(self) -> int:
        return len(self.k) - 1


class RateQuantities(NamedTuple):
    u: np.ndarray
    theta: np.ndarray
    r: np.ndarray


def _log(x: float, what: str) -> float:
    if not x > 0:
        raise ValueError(f"log of non-positive {what}: {x}")
    return math.log(x)


def penalized_term(lambda_pen: float, B: float, k: int) -> float:
    """``-log(p) + p`` with ``p = lambda_pen * B^2 / (k + 1)``; minimal at ``p = 1``."""
    p = lambda_pen * B * B / (k + 1)
    return -_log(p, "penalty argument") + p


def _rates(spec: TopologySpec, pens: list[float], u_extra: float) -> RateQuantities:
    n, k = spec.n, spec.k
    u_val = (_log(n, "n") + _log(spec.L, "L") + sum(math.log(x) for x in k[:-1])
             + sum(math.log(x) for x in k[1:]) + u_extra)
    shared = 2 * math.log(n) + 2 * spec.L + 2 * sum(_log(b, "B_m") for b in spec.B)
    theta = np.array([penalized_term(pen, spec.B[l], k[l]) + shared
                      for l, pen in enumerate(pens)])
    r = np.array([spec.s[l] * (k[l] + 1) * theta[l] / n for l in range(spec.n_layers)])
    return RateQuantities(np.full(spec.n_layers, u_val), theta, r)


def lambda_pen_gl(spec: TopologySpec, layer: int) -> float:
    return 1.0 / (spec.t0_dprime * (spec.k[layer] + 1))


def lambda_pen_ghs(spec: TopologySpec) -> float:
    return 1.0 / (spec.t0 * spec.t0_prime) + 1.0 / spec.creg_sq


def rate_quantities_gl(spec: TopologySpec) -> RateQuantities:
    return _rates(spec, [lambda_pen_gl(spec, l) for l in range(spec.n_layers)], 0.0)


def rate_quantities_ghs(spec: TopologySpec) -> RateQuantities:
    pen = lambda_pen_ghs(spec)
    return _rates(spec, [pen] * spec.n_layers, math.log(spec.creg_sq))


def rate_quantities(spec: TopologySpec, kind: str) -> RateQuantities:
    if kind == "ss-gl":
        return rate_quantities_gl(spec)
    if kind == "ss-ghs":
        return rate_quantities_ghs(spec)
    raise ValueError(f"no rate formulas for prior kind {kind!r}")


def epsilon_n(spec: TopologySpec, rates: RateQuantities) -> float:
    return math.sqrt((float(np.sum(rates.r)) + spec.xi) * float(np.sum(rates.u)))


def lambda_l(spec: TopologySpec, theta) -> np.ndarray:
    """``(1/k_{l+1}) exp(-C_l (k_l + 1) theta_l)`` floored at 1e-50; output layer 1."""
    theta = np.asarray(theta, dtype=np.float64)
    k = spec.k
    lam = np.empty(spec.n_layers)
    for l in range(spec.n_layers):
        log_lam = -math.log(k[l + 1]) - spec.C[l] * (k[l] + 1) * theta[l]
        lam[l] = max(math.exp(log_lam), LAMBDA_FLOOR)
    lam[-1] = 1.0
    return lam


@dataclass
class Plan:
    kind: str
    rates: RateQuantities
    lambdas: np.ndarray
    epsilon: float

    def hidden_lambdas(self) -> tuple[float, ...]:
        """The values a ``PriorSpec`` takes (output layer omitted)."""
        return tuple(float(x) for x in self.lambdas[:-1])

    def to_csv(self) -> str:
        lines = ["layer,u,theta,r,lambda"]
        for l in range(len(self.lambdas)):
            vals = (self.rates.u[l], self.rates.theta[l], self.rates.r[l], self.lambdas[l])
            lines.append(f"{l}," + ",".join(repr(float(v)) for v in vals))
        lines.append(f"epsilon_n,{float(self.epsilon)!r}")
        return "\n".join(lines) + "\n"


def plan(spec: TopologySpec, kind: str = "ss-gl") -> Plan:
    rates = rate_quantities(spec, kind)
    return Plan(kind, rates, lambda_l(spec, rates.theta), epsilon_n(spec, rates))


@dataclass(frozen=True)
class RegimeSetting:
    """Growth regime for a Hölder-alpha function of ``p`` inputs."""

    n: int
    alpha: float = 1.0
    p: int = 2
    rho: float = 0.5
    layers_override: int | None = field(default=None)

    def topology(self, k_in: int | None = None, k_out: int = 1) -> TopologySpec:
        n, a, p, rho = self.n, self.alpha, self.p, self.rho
        logn = math.log(n)
        L = self.layers_override or math.ceil(logn)
        width = max(1, math.ceil(n ** (p * (1 - rho) / (2 * a + p)) / logn))
        sparsity = math.ceil(n ** (p * rho / (2 * a + p)))
        xi = n ** (-2 * a / (2 * a + p))
        k = (k_in or p,) + (width,) * L + (k_out,)
        s = tuple(min(sparsity, kk) for kk in k[1:])
        return TopologySpec(n=n, k=k, s=s, xi=xi)

    def reference_rate(self) -> float:
        return self.n ** (-self.alpha / (self.alpha + self.p))


def regime_ratio(setting: RegimeSetting, kind: str = "ss-gl") -> float:
    """``eps_n`` over the reference rate ``n^(-alpha/(alpha+p))`` for the regime topology."""
    spec = setting.topology()
    return epsilon_n(spec, rate_quantities(spec, kind)) / setting.reference_rate()
