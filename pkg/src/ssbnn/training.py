"""Minibatch training loop, optimizers, metric traces and early stopping."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .metrics import sparsity_report
from .network import SpikeSlabMLP, elbo_terms, predict_posterior_mean
from .sampling import SeededRng

OPTIMIZERS = ("adam", "sgd-momentum")

# rng streams derived from the run seed
STREAM_INIT = 0
STREAM_SHUFFLE = 1
STREAM_NOISE = 2
STREAM_EVAL = 3


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class Optimizer:
    """First-order optimizer with per-parameter slots.

    ``sgd-momentum``: ``v <- m v + g``, ``p <- p - lr v``.
    ``adam``: bias-corrected first and second moments.
    """

    kind: str = "adam"
    lr: float = 1e-3
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    slots: list[dict[str, np.ndarray]] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.kind!r}; expected one of {OPTIMIZERS}")
        if self.lr < 0:
            raise ValueError("learning rate must be non-negative")

    def _ensure_slots(self, params: list[ad.Node]) -> None:
        if not self.slots:
            names = ("v",) if self.kind == "sgd-momentum" else ("m", "v")
            self.slots = [{k: np.zeros_like(p.value) for k in names} for p in params]
        elif len(self.slots) != len(params):
            raise ValueError("optimizer was built for a different parameter list")

    def step(self, params: list[ad.Node], grads: list[np.ndarray] | None = None) -> None:
        grads = grads if grads is not None else [p.grad for p in params]
        self._ensure_slots(params)
        self.step_count += 1
        for p, g, slot in zip(params, grads, self.slots):
            if g.shape != p.value.shape:
                raise ad.ShapeError("optimizer_step", p.value.shape, g.shape)
            if self.kind == "sgd-momentum":
                slot["v"] = self.momentum * slot["v"] + g
                update = self.lr * slot["v"]
            else:
                slot["m"] = self.beta1 * slot["m"] + (1 - self.beta1) * g
                slot["v"] = self.beta2 * slot["v"] + (1 - self.beta2) * g * g
                m_hat = slot["m"] / (1 - self.beta1 ** self.step_count)
                v_hat = slot["v"] / (1 - self.beta2 ** self.step_count)
                update = self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            p.value = p.value - update


def build_model(config, seed: int) -> SpikeSlabMLP:
    """Fresh model initialized from the run seed's init stream."""
    return SpikeSlabMLP(config, SeededRng(seed, STREAM_INIT))


def optimizer_step(opt: Optimizer, params: list[ad.Node], grads: list[np.ndarray]) -> None:
    opt.step(params, grads)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 1024
    S: int = 1
    lr: float = 1e-3
    seed: int = 0
    optimizer: str = "adam"
    momentum: float = 0.9
    elbo_tolerance: float = 0.0
    eval_every: int = 1
    eval_samples: int = 10
    lr_decay_every: int = 0
    lr_decay: float = 1.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.S < 1:
            raise ValueError(f"S must be >= 1, got {self.S}")
        if self.lr < 0:
            raise ValueError("lr must be non-negative")
        if self.eval_every < 1 or self.eval_samples < 1:
            raise ValueError("eval_every and eval_samples must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.elbo_tolerance < 0:
            raise ValueError("elbo_tolerance must be non-negative")

    def make_optimizer(self) -> Optimizer:
        return Optimizer(self.optimizer, self.lr, momentum=self.momentum)


EARLY_STOP_WINDOW = 3


def early_stop(trace: list[float], eps: float, window: int = EARLY_STOP_WINDOW) -> bool:
    """True once the last ``window`` epoch-to-epoch ELBO changes are all ``<= eps``."""
    if len(trace) < window + 1:
        return False
    tail = np.asarray(trace[-(window + 1):], dtype=np.float64)
    return bool(np.all(np.abs(np.diff(tail)) <= eps))


def evaluate(model: SpikeSlabMLP, x, y, S: int, rng: SeededRng) -> float:
    """Accuracy (classification) or RMSE (regression) of the posterior-mean predictor."""
    pred = predict_posterior_mean(x, model, S, rng)
    y = np.asarray(y)
    if model.config.likelihood == "categorical":
        return float(np.mean(pred == y))
    return float(np.sqrt(np.mean((pred.reshape(y.shape) - y) ** 2)))


def metric_name(model: SpikeSlabMLP) -> str:
    return "accuracy" if model.config.likelihood == "categorical" else "rmse"


@dataclass
class TrainResult:
    model: SpikeSlabMLP
    trace: list[dict[str, float]]
    optimizer: Optimizer
    stopped_early: bool = False
    seconds: float = 0.0

    def to_csv(self) -> str:
        return trace_to_csv(self.trace)


def trace_to_csv(trace: list[dict[str, float]]) -> str:
    if not trace:
        return ""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = list(trace[0].keys())
    writer.writerow(header)
    for row in trace:
        writer.writerow([row[k] if k == "epoch" else repr(float(row[k])) for k in header])
    return buf.getvalue()


def write_trace_csv(trace: list[dict[str, float]], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(trace_to_csv(trace))


def _check_finite(terms, epoch: int, step: int) -> None:
    for name in ("nll", "kl"):
        v = getattr(terms, name).value
        if not np.all(np.isfinite(v)):
            raise TrainingDivergedError(
                f"non-finite {name} term ({float(v)!r}) at epoch {epoch}, step {step}")


def train(
    model: SpikeSlabMLP,
    x,
    y,
    cfg: TrainConfig,
    optimizer: Optimizer | None = None,
    x_eval=None,
    y_eval=None,
    log=None,
) -> TrainResult:
    """Run minibatch stochastic variational inference.

    Each step draws ``S`` posterior samples with hard indicators forward and
    relaxed indicators backward, builds the negative ELBO and applies one
    optimizer step. After each epoch a trace row is recorded with the mean
    minibatch ELBO/NLL/KL, the evaluation metric (on ``x_eval``/``y_eval``
    when given, else on the training data) and the structural metrics.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    n = x.shape[0]
    if n == 0:
        raise ValueError("training set is empty")
    if x.ndim != 2 or x.shape[1] != model.config.widths[0]:
        raise ad.ShapeError("train", x.shape, (n, model.config.widths[0]),
                            detail="input width must equal widths[0]")
    if y.shape[0] != n:
        raise ad.ShapeError("train", x.shape, y.shape, detail="row counts differ")
    if x_eval is None:
        x_eval, y_eval = x, y

    opt = optimizer or cfg.make_optimizer()
    params = model.parameters()
    shuffle_rng = SeededRng(cfg.seed, STREAM_SHUFFLE)
    noise_rng = SeededRng(cfg.seed, STREAM_NOISE)
    name = metric_name(model)
    trace: list[dict[str, float]] = []
    stopped = False
    t0 = time.perf_counter()
    last_metric = math.nan

    for epoch in range(1, cfg.epochs + 1):
        if cfg.lr_decay_every and epoch > 1 and (epoch - 1) % cfg.lr_decay_every == 0:
            opt.lr *= cfg.lr_decay
        order = shuffle_rng.permutation(n)
        sums = np.zeros(3)
        n_batches = 0
        for step, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            terms = elbo_terms(model, x[idx], y[idx], n, cfg.S, noise_rng)
            _check_finite(terms, epoch, step)
            ad.zero_grad(params)
            ad.backward(terms.loss)
            opt.step(params)
            sums += (terms.loss.value, terms.nll.value, terms.kl.value)
            n_batches += 1

        for pname, p in model.named_parameters().items():
            if not np.all(np.isfinite(p.value)):
                raise TrainingDivergedError(f"non-finite values in {pname} after epoch {epoch}")

        if epoch == 1 or epoch % cfg.eval_every == 0 or epoch == cfg.epochs:
            last_metric = evaluate(model, x_eval, y_eval, cfg.eval_samples,
                                   SeededRng(cfg.seed, (STREAM_EVAL, epoch)))
        elbo, nll, kl = sums / n_batches
        row = {"epoch": epoch, "elbo": elbo, "nll": nll, "kl": kl, name: last_metric}
        row.update(sparsity_report(model.layers).as_row())
        trace.append(row)
        if log is not None:
            log(row)
        if cfg.elbo_tolerance > 0 and early_stop([r["elbo"] for r in trace], cfg.elbo_tolerance):
            stopped = True
            break

    return TrainResult(model, trace, opt, stopped, time.perf_counter() - t0)
