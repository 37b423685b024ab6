"""Seeded random streams and the reparameterized samplers used by the ELBO."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad

U_CLAMP = 1e-10


class SeededRng:
    """Philox stream addressed by ``(seed, stream)``.

    Streams are derived through ``SeedSequence`` spawn keys, so a given
    ``(seed, stream)`` pair yields the same draws regardless of which other
    streams exist or in what order they are consumed.
    """

    def __init__(self, seed: int, stream: int | tuple[int, ...] = ()):
        if isinstance(stream, int):
            stream = (stream,)
        self.seed = int(seed)
        self.stream = tuple(int(s) for s in stream)
        seq = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        self._gen = np.random.Generator(np.random.Philox(seq))

    def spawn(self, stream: int) -> "SeededRng":
        return SeededRng(self.seed, self.stream + (int(stream),))

    def normal(self, shape=()) -> np.ndarray:
        return self._gen.standard_normal(shape)

    def uniform(self, shape=()) -> np.ndarray:
        return self._gen.random(shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def uniform_range(self, low: float, high: float, shape=()) -> np.ndarray:
        return self._gen.uniform(low, high, shape)

    @property
    def state(self) -> dict:
        return {"seed": self.seed, "stream": list(self.stream),
                "bit_generator": self._gen.bit_generator.state}

    @classmethod
    def from_state(cls, state: dict) -> "SeededRng":
        rng = cls(state["seed"], tuple(state["stream"]))
        rng._gen.bit_generator.state = state["bit_generator"]
        return rng


@dataclass(frozen=True)
class RelaxationConfig:
    temperature: float = 0.5
    hard_forward: bool = True

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")


def _check_scale(sigma, what: str) -> None:
    v = sigma.value if isinstance(sigma, ad.Node) else np.asarray(sigma)
    # zero is the degenerate (point-mass) limit and stays legal
    if not np.all(np.isfinite(v)) or np.any(v < 0):
        raise ValueError(f"{what}: scale must be finite and non-negative")


def sample_gaussian_reparam(mu, sigma, rng: SeededRng, noise=None) -> ad.Node:
    """``mu + sigma * e`` with ``e ~ N(0, I)``; ``noise`` overrides ``e``."""
    mu, sigma = ad.as_node(mu), ad.as_node(sigma)
    _check_scale(sigma, "sample_gaussian_reparam")
    if mu.shape != sigma.shape:
        raise ad.ShapeError("sample_gaussian_reparam", mu.shape, sigma.shape)
    e = rng.normal(mu.shape) if noise is None else np.broadcast_to(noise, mu.shape)
    return mu + sigma * e


def sample_lognormal(mu, sigma, rng: SeededRng, noise=None) -> ad.Node:
    """``exp(mu + sigma * e)``; the gradient flows through the exponent."""
    mu, sigma = ad.as_node(mu), ad.as_node(sigma)
    v = sigma.value
    if not np.all(v > 0):
        raise ValueError("sample_lognormal: sigma must be positive")
    e = rng.normal(np.broadcast_shapes(mu.shape, sigma.shape)) if noise is None else noise
    return ad.exp(mu + sigma * e)


def _logit(p: np.ndarray) -> np.ndarray:
    return np.log(p) - np.log1p(-p)


def relaxed_bernoulli_from_logits(
    logits, cfg: RelaxationConfig, rng: SeededRng, u=None
) -> tuple[ad.Node, np.ndarray]:
    """Gumbel-softmax draw for Bernoulli indicators parameterized by logit(gamma).

    Returns the node used downstream and the hard 0/1 sample. With
    ``cfg.hard_forward`` the node carries the hard values but differentiates
    through the relaxed sample.
    """
    logits = ad.as_node(logits)
    if u is None:
        u = rng.uniform(logits.shape)
    u = np.clip(np.asarray(u, dtype=np.float64), U_CLAMP, 1.0 - U_CLAMP)
    eta = logits + _logit(u)
    z_soft = ad.sigmoid(eta / cfg.temperature)
    z_hard = (z_soft.value >= 0.5).astype(np.float64)
    if cfg.hard_forward:
        return ad.straight_through(z_hard, z_soft), z_hard
    return z_soft, z_hard


def sample_gumbel_softmax(
    gamma, cfg: RelaxationConfig, rng: SeededRng, u=None
) -> tuple[ad.Node, np.ndarray]:
    """Relaxed Bernoulli(gamma) sample; ``gamma`` must lie strictly in (0, 1)."""
    g = gamma.value if isinstance(gamma, ad.Node) else np.asarray(gamma, dtype=np.float64)
    if not np.all((g > 0) & (g < 1)):
        raise ValueError("sample_gumbel_softmax: gamma must lie in (0, 1)")
    if isinstance(gamma, ad.Node):
        logits = ad.log(gamma) - ad.log(1.0 - gamma)
    else:
        logits = _logit(g)
    return relaxed_bernoulli_from_logits(logits, cfg, rng, u=u)


def softplus_transform(rho):
    """Positive scale from an unconstrained parameter, stable for any ``rho``."""
    if isinstance(rho, ad.Node):
        return ad.softplus(rho)
    return np.logaddexp(0.0, np.asarray(rho, dtype=np.float64))
