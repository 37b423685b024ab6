"""Spike-and-slab Bayesian MLP: likelihoods, negative ELBO and prediction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import autodiff as ad
from .layers import (
    PARAMETERIZATIONS,
    LayerVariationalState,
    SampledLayer,
    init_layer,
    layer_forward,
    layer_kl,
    sample_layer,
)
from .priors import GlobalScaleState, PriorSpec, global_kl, init_globals, sample_globals
from .sampling import RelaxationConfig, SeededRng

ACTIVATIONS = {"swish": ad.swish, "relu": ad.relu}
LIKELIHOODS = ("gaussian", "categorical")


@dataclass(frozen=True)
class NetworkConfig:
    widths: tuple[int, ...]
    activation: str = "swish"
    likelihood: str = "categorical"
    parameterization: str = "centered"
    prior: PriorSpec = field(default_factory=PriorSpec)
    relaxation: RelaxationConfig = field(default_factory=RelaxationConfig)

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 3:
            raise ValueError("need at least one hidden layer: widths = (k0, k1, ..., k_out)")
        if any(w < 1 for w in self.widths):
            raise ValueError(f"all widths must be >= 1, got {self.widths}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.likelihood not in LIKELIHOODS:
            raise ValueError(f"unknown likelihood {self.likelihood!r}")
        if self.parameterization not in PARAMETERIZATIONS:
            raise ValueError(f"unknown parameterization {self.parameterization!r}")
        n_hidden = len(self.widths) - 2
        if len(self.prior.lambdas) != n_hidden:
            raise ValueError(
                f"prior lists {len(self.prior.lambdas)} inclusion probabilities, "
                f"network has {n_hidden} hidden layers"
            )

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1


class SpikeSlabMLP:
    """Variational state of a whole network plus its configuration."""

    def __init__(self, config: NetworkConfig, rng: SeededRng | None = None,
                 layers: list[LayerVariationalState] | None = None,
                 globals_: GlobalScaleState | None = None):
        self.config = config
        if layers is None:
            if rng is None:
                raise ValueError("an rng is required to initialize a fresh model")
            w = config.widths
            layers = [init_layer(w[i], w[i + 1], config.prior, i == len(w) - 2, rng)
                      for i in range(len(w) - 1)]
        self.layers = layers
        self.globals = globals_ if globals_ is not None else init_globals(config.prior)

    @property
    def prior(self) -> PriorSpec:
        return self.config.prior

    def parameters(self) -> list[ad.Node]:
        params = []
        for layer in self.layers:
            params.extend(layer.parameters())
        params.extend(self.globals.parameters())
        return params

    def named_parameters(self) -> dict[str, ad.Node]:
        out = {}
        for i, layer in enumerate(self.layers):
            out[f"layer{i}.mu"] = layer.mu
            out[f"layer{i}.rho"] = layer.rho
            if layer.gamma_logit is not None:
                out[f"layer{i}.gamma_logit"] = layer.gamma_logit
            for k, v in layer.local.items():
                out[f"layer{i}.{k}"] = v
        for k, v in self.globals.params.items():
            out[f"global.{k}"] = v
        return out

    def sample(self, rng: SeededRng, cfg: RelaxationConfig | None = None) -> list[SampledLayer]:
        cfg = cfg or self.config.relaxation
        draws = sample_globals(self.globals, rng)
        return [sample_layer(layer, self.prior, cfg, self.config.parameterization, rng, draws)
                for layer in self.layers]

    def layer_kls(self) -> list[ad.Node]:
        n = len(self.layers)
        return [layer_kl(layer, self.prior, self.prior.layer_lambda(i, n), self.globals,
                         self.config.parameterization)
                for i, layer in enumerate(self.layers)]

    def kl(self) -> ad.Node:
        return negative_elbo_kl_total(self)


def forward(x, sampled: list[SampledLayer], activation: str = "swish") -> ad.Node:
    act = ACTIVATIONS[activation]
    h = ad.as_node(x)
    for i, layer in enumerate(sampled):
        h = layer_forward(h, layer)
        if i < len(sampled) - 1:
            h = act(h)
    return h


def negative_log_likelihood(eta, y, likelihood: str) -> ad.Node:
    """Summed over the batch. Regression assumes unit noise variance."""
    eta = ad.as_node(eta)
    y = np.asarray(y)
    if likelihood == "gaussian":
        target = y.reshape(eta.shape) if y.size == eta.size else None
        if target is None:
            raise ad.ShapeError("negative_log_likelihood", eta.shape, y.shape)
        resid = eta - target.astype(np.float64)
        return 0.5 * ad.sum(ad.square(resid)) + eta.shape[0] * 0.5 * math.log(2 * math.pi)
    if likelihood == "categorical":
        if y.ndim != 1 or y.shape[0] != eta.shape[0]:
            raise ad.ShapeError("negative_log_likelihood", eta.shape, y.shape)
        labels = y.astype(np.int64)
        if labels.min(initial=0) < 0 or labels.max(initial=0) >= eta.shape[1]:
            raise ValueError(f"labels must lie in [0, {eta.shape[1] - 1}]")
        picked = eta[np.arange(eta.shape[0]), labels]
        return ad.sum(ad.log_sum_exp(eta, axis=1)) - ad.sum(picked)
    raise ValueError(f"unknown likelihood {likelihood!r}")


def negative_elbo_kl_total(model: SpikeSlabMLP) -> ad.Node:
    """Every KL term of the objective: per-layer sums plus shared-scale terms once."""
    if model.globals.kind != model.prior.kind:
        raise ValueError(
            f"model state is {model.globals.kind!r} but prior is {model.prior.kind!r}")
    total = global_kl(model.globals, model.prior)
    for term in model.layer_kls():
        total = total + term
    return total


class ElboTerms(NamedTuple):
    loss: ad.Node
    nll: ad.Node
    kl: ad.Node


def elbo_terms(model: SpikeSlabMLP, x, y, n: int, S: int, rng: SeededRng,
               cfg: RelaxationConfig | None = None) -> ElboTerms:
    if S < 1:
        raise ValueError("S must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    batch = x.shape[0]
    if batch < 1:
        raise ValueError("empty batch")
    nll = None
    for _ in range(S):
        eta = forward(x, model.sample(rng, cfg), model.config.activation)
        term = negative_log_likelihood(eta, y, model.config.likelihood)
        nll = term if nll is None else nll + term
    scaled_nll = nll * (n / (batch * S))
    kl = negative_elbo_kl_total(model)
    return ElboTerms(scaled_nll + kl, scaled_nll, kl)


def negative_elbo(model: SpikeSlabMLP, x, y, n: int, S: int, rng: SeededRng,
                  cfg: RelaxationConfig | None = None) -> ad.Node:
    """``(n / |batch|) * mean_S NLL + KL``; the KL is analytic and counted once."""
    return elbo_terms(model, x, y, n, S, rng, cfg).loss


def predictive_outputs(x, model: SpikeSlabMLP, S: int, rng: SeededRng) -> np.ndarray:
    """Raw network outputs for ``S`` posterior draws, shape ``(S, batch, k_out)``."""
    if S < 1:
        raise ValueError("S must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    return np.stack([forward(x, model.sample(rng), model.config.activation).value
                     for _ in range(S)])


def predict_posterior_mean(x, model: SpikeSlabMLP, S: int = 10,
                           rng: SeededRng | None = None) -> np.ndarray:
    """Regression: mean output over draws. Classification: argmax of mean softmax."""
    rng = rng or SeededRng(0, 99)
    outs = predictive_outputs(x, model, S, rng)
    if model.config.likelihood == "gaussian":
        return outs.mean(axis=0)
    shifted = outs - outs.max(axis=-1, keepdims=True)
    probs = np.exp(shifted)
    probs /= probs.sum(axis=-1, keepdims=True)
    return probs.mean(axis=0).argmax(axis=-1)


class TruthDiagnostic(NamedTuple):
    kl: float
    hellinger_sq: float


def kl_to_truth_diagnostic(model: SpikeSlabMLP, teacher: Callable[[np.ndarray], np.ndarray],
                           grid, S: int = 10, rng: SeededRng | None = None) -> TruthDiagnostic:
    """Grid averages of KL(P0, P) and squared Hellinger for unit-variance regression.

    Both use the posterior-mean network; for two unit-variance Gaussians the
    KL is ``d^2 / 2`` and the squared Hellinger distance ``1 - exp(-d^2 / 8)``.
    """
    if model.config.likelihood != "gaussian":
        raise ValueError("kl_to_truth_diagnostic requires the gaussian regression likelihood")
    grid = np.asarray(grid, dtype=np.float64)
    pred = predict_posterior_mean(grid, model, S, rng).reshape(grid.shape[0], -1)
    truth = np.asarray(teacher(grid), dtype=np.float64).reshape(pred.shape)
    return truth_diagnostic_from_outputs(truth, pred)


def truth_diagnostic_from_outputs(truth, pred) -> TruthDiagnostic:
    d2 = np.sum((np.asarray(truth) - np.asarray(pred)) ** 2, axis=-1)
    return TruthDiagnostic(float(0.5 * d2.mean()), float(np.mean(1.0 - np.exp(-d2 / 8.0))))
