"""Structural metrics: node/channel sparsity, compression ratio and FLOPs.

FLOPs count multiplications only, with activations free. A linear layer
costs ``(I_pr + 1) * O_pr`` and a convolution
``(C_in_pr * K_w * K_h + 1) * O_w * O_h * C_out_pr``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, fields, replace

import numpy as np

from .layers import LayerVariationalState, active_nodes

PRUNE_THRESHOLD = 0.5


@dataclass(frozen=True)
class LayerShape:
    """Dense and pruned sizes of one linear or conv2d layer.

    For linear layers only ``I, O, I_pr, O_pr`` are used; for conv2d layers
    the channel, kernel, input, padding, dilation and stride fields.
    Pruned counts default to the dense ones.
    """

    kind: str
    I: int = 0
    O: int = 0
    I_pr: int | None = None
    O_pr: int | None = None
    C_in: int = 0
    C_out: int = 0
    C_in_pr: int | None = None
    C_out_pr: int | None = None
    K_w: int = 1
    K_h: int = 1
    I_w: int = 1
    I_h: int = 1
    P_w: int = 0
    P_h: int = 0
    D_w: int = 1
    D_h: int = 1
    S_w: int = 1
    S_h: int = 1

    def __post_init__(self):
        for name, dense in (("I_pr", "I"), ("O_pr", "O"), ("C_in_pr", "C_in"), ("C_out_pr", "C_out")):
            if getattr(self, name) is None:
                object.__setattr__(self, name, getattr(self, dense))
        if self.kind == "linear":
            sizes = {"I": self.I, "O": self.O}
            pruned = {"I_pr": (self.I_pr, self.I), "O_pr": (self.O_pr, self.O)}
        elif self.kind == "conv2d":
            sizes = {"C_in": self.C_in, "C_out": self.C_out}
            pruned = {"C_in_pr": (self.C_in_pr, self.C_in), "C_out_pr": (self.C_out_pr, self.C_out)}
            for name in ("K_w", "K_h", "S_w", "S_h", "D_w", "D_h", "I_w", "I_h"):
                if getattr(self, name) < 1:
                    raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
            if self.P_w < 0 or self.P_h < 0:
                raise ValueError("padding must be non-negative")
        else:
            raise ValueError(f"unknown layer kind {self.kind!r}; expected 'linear' or 'conv2d'")
        for name, v in sizes.items():
            if v < 1:
                raise ValueError(f"{name} must be >= 1, got {v}")
        for name, (v, dense) in pruned.items():
            if not 0 <= v <= dense:
                raise ValueError(f"{name}={v} must lie in [0, {dense}]")

    @property
    def out_units(self) -> int:
        return self.O if self.kind == "linear" else self.C_out

    @property
    def out_units_pruned(self) -> int:
        return self.O_pr if self.kind == "linear" else self.C_out_pr

    def with_input_pruned(self, n: int) -> "LayerShape":
        if self.kind == "linear":
            return replace(self, I_pr=n)
        return replace(self, C_in_pr=n)

    def dense(self) -> "LayerShape":
        if self.kind == "linear":
            return replace(self, I_pr=self.I, O_pr=self.O)
        return replace(self, C_in_pr=self.C_in, C_out_pr=self.C_out)


def conv_output_size(i: int, k: int, p: int, d: int, s: int) -> int:
    return (i + 2 * p - d * (k - 1) - 1) // s + 1


def flops_linear(I_pr: int, O_pr: int) -> int:
    if I_pr < 0 or O_pr < 0:
        raise ValueError("layer sizes must be non-negative")
    return (int(I_pr) + 1) * int(O_pr)


def flops_conv(shape: LayerShape) -> int:
    if shape.kind != "conv2d":
        raise ValueError("flops_conv needs a conv2d LayerShape")
    o_w = conv_output_size(shape.I_w, shape.K_w, shape.P_w, shape.D_w, shape.S_w)
    o_h = conv_output_size(shape.I_h, shape.K_h, shape.P_h, shape.D_h, shape.S_h)
    if o_w < 1 or o_h < 1:
        raise ValueError(f"non-positive conv output size {o_w}x{o_h}")
    return (shape.C_in_pr * shape.K_w * shape.K_h + 1) * o_w * o_h * shape.C_out_pr


def layer_flops(shape: LayerShape) -> int:
    if shape.kind == "linear":
        return flops_linear(shape.I_pr, shape.O_pr)
    return flops_conv(shape)


def chain_shapes(shapes: list[LayerShape]) -> list[LayerShape]:
    """Propagate each layer's surviving outputs into the next layer's pruned inputs.

    The first layer keeps its own ``I_pr``/``C_in_pr`` (inputs are never
    pruned). When a conv stack is flattened into a linear layer, the
    pruned input count scales by the spatial size ``I / C_out``.
    """
    out = [shapes[0]] if shapes else []
    for prev, cur in zip(shapes, shapes[1:]):
        kept = out[-1].out_units_pruned
        if prev.kind == "conv2d" and cur.kind == "linear":
            per_channel, rem = divmod(cur.I, prev.C_out)
            if rem:
                raise ValueError(f"linear input {cur.I} is not a multiple of {prev.C_out} channels")
            kept *= per_channel
        out.append(cur.with_input_pruned(kept))
    return out


def flops_table(shapes: list[LayerShape]) -> list[tuple[int, int]]:
    """Per-layer ``(dense, pruned)`` FLOPs after chaining."""
    chained = chain_shapes(shapes)
    return [(layer_flops(s.dense()), layer_flops(s)) for s in chained]


def flops_ratio(shapes: list[LayerShape]) -> float:
    table = flops_table(shapes)
    dense = sum(d for d, _ in table)
    return sum(p for _, p in table) / dense


def channel_sparsity(shape: LayerShape) -> float:
    if shape.kind != "conv2d":
        raise ValueError("channel_sparsity needs a conv2d LayerShape")
    return shape.C_out_pr / shape.C_out


def node_sparsity(state: LayerVariationalState, threshold: float = PRUNE_THRESHOLD) -> float:
    """Fraction of a layer's nodes that stay active (``gamma > threshold``)."""
    return float(active_nodes(state, threshold).mean())


def active_counts(layers: list[LayerVariationalState], threshold: float = PRUNE_THRESHOLD) -> list[int]:
    return [int(active_nodes(s, threshold).sum()) for s in layers]


def model_shapes(layers: list[LayerVariationalState],
                 threshold: float = PRUNE_THRESHOLD) -> list[LayerShape]:
    counts = active_counts(layers, threshold)
    return chain_shapes([LayerShape("linear", I=s.fan_in, O=s.fan_out, O_pr=c)
                         for s, c in zip(layers, counts)])


def compression_ratio(layers: list[LayerVariationalState], threshold: float = PRUNE_THRESHOLD) -> float:
    """Surviving weights (biases included) over dense weights."""
    shapes = model_shapes(layers, threshold)
    dense = sum(s.O * (s.I + 1) for s in shapes)
    return sum(s.O_pr * (s.I_pr + 1) for s in shapes) / dense


def model_flops_ratio(layers: list[LayerVariationalState], threshold: float = PRUNE_THRESHOLD) -> float:
    return flops_ratio(model_shapes(layers, threshold))


def materialize_pruned(layers: list[LayerVariationalState],
                       threshold: float = PRUNE_THRESHOLD) -> list[np.ndarray]:
    """Posterior-mean weight blocks with pruned rows and dead input columns zeroed.

    Entries that happen to be exactly zero in ``mu`` are replaced by a tiny
    nonzero so that counting nonzeros measures structure only.
    """
    blocks = []
    alive_in = None
    for s in layers:
        W = np.where(s.mu.value == 0.0, np.finfo(float).tiny, s.mu.value)
        mask = active_nodes(s, threshold).astype(bool)
        W = W * mask[:, None]
        if alive_in is not None:
            W[:, 1:] = W[:, 1:] * alive_in[None, :]
        blocks.append(W)
        alive_in = mask
    return blocks


def sparsity_from_blocks(blocks: list[np.ndarray]) -> list[float]:
    return [float(np.any(W != 0, axis=1).mean()) for W in blocks]


def compression_from_blocks(blocks: list[np.ndarray]) -> float:
    return sum(int(np.count_nonzero(W)) for W in blocks) / sum(W.size for W in blocks)


def flops_ratio_from_blocks(blocks: list[np.ndarray]) -> float:
    pruned = dense = 0
    for W in blocks:
        rows = np.any(W != 0, axis=1)
        cols = np.any(W[rows, 1:] != 0, axis=0) if rows.any() else np.zeros(W.shape[1] - 1, bool)
        pruned += flops_linear(int(cols.sum()), int(rows.sum()))
        dense += flops_linear(W.shape[1] - 1, W.shape[0])
    return pruned / dense


@dataclass(frozen=True)
class SparsityReport:
    node_sparsity: tuple[float, ...]
    compression: float
    flops_ratio: float

    def as_row(self) -> dict[str, float]:
        row = {f"sparsity_l{i}": v for i, v in enumerate(self.node_sparsity)}
        row["compression"] = self.compression
        row["flops_ratio"] = self.flops_ratio
        return row


def sparsity_report(layers: list[LayerVariationalState],
                    threshold: float = PRUNE_THRESHOLD) -> SparsityReport:
    """Hidden-layer node sparsity plus whole-network compression and FLOPs ratios."""
    hidden = tuple(node_sparsity(s, threshold) for s in layers if not s.is_output)
    return SparsityReport(hidden, compression_ratio(layers, threshold),
                          model_flops_ratio(layers, threshold))


# ---------------------------------------------------------------- text format

_INT_FIELDS = {f.name for f in fields(LayerShape)} - {"kind"}
_TOKEN = re.compile(r"^([A-Za-z_]+)=(-?\d+)$")


def parse_architecture(text: str) -> list[LayerShape]:
    """Parse one layer per line: ``kind key=value ...``.

    Blank lines and ``#`` comments are ignored. Example::

        conv2d C_in=1 C_out=20 K_w=5 K_h=5 I_w=28 I_h=28
        linear I=800 O=500 O_pr=120
    """
    shapes = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kind, *tokens = line.split()
        kw = {}
        for tok in tokens:
            m = _TOKEN.match(tok)
            if not m or m.group(1) not in _INT_FIELDS:
                raise ValueError(f"line {lineno}: bad field {tok!r}")
            kw[m.group(1)] = int(m.group(2))
        try:
            shapes.append(LayerShape(kind, **kw))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if not shapes:
        raise ValueError("architecture description has no layers")
    return shapes
