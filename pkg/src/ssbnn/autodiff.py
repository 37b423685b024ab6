"""Reverse-mode automatic differentiation over float64 numpy arrays.

A :class:`Node` wraps an array payload and remembers which primitive produced
it. Calling :func:`backward` on a scalar node walks the graph in reverse
topological order and fills every reachable ``grad`` slot.

Elementwise primitives follow numpy broadcasting; the gradient is summed back
to each operand's shape.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Node",
    "ShapeError",
    "as_node",
    "constant",
    "parameter",
    "backward",
    "zero_grad",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "exp",
    "log",
    "sigmoid",
    "swish",
    "relu",
    "softplus",
    "square",
    "sqrt",
    "sum",
    "mean",
    "log_sum_exp",
    "broadcast_to",
    "maximum",
    "getitem",
    "reshape",
    "transpose",
    "straight_through",
]


class ShapeError(ValueError):
    """Operand shapes do not conform to a primitive."""

    def __init__(self, primitive: str, *shapes: tuple[int, ...], detail: str = ""):
        self.primitive = primitive
        self.shapes = shapes
        shown = ", ".join(str(tuple(s)) for s in shapes)
        msg = f"{primitive}: incompatible shapes {shown}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class Node:
    """A value in the differentiation graph.

    ``requires_grad`` is true for trainable leaves and for anything computed
    from them; constant branches are never differentiated.
    """

    __slots__ = ("value", "grad", "op", "parents", "requires_grad", "_backward", "name")
    __array_priority__ = 100.0

    def __init__(
        self,
        value,
        parents: tuple["Node", ...] = (),
        op: str = "leaf",
        backward_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None,
        requires_grad: bool | None = None,
        name: str | None = None,
    ):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = parents
        self.op = op
        self._backward = backward_fn
        if requires_grad is None:
            requires_grad = any(p.requires_grad for p in parents)
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.value) if (requires_grad and not parents) else None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def size(self) -> int:
        return self.value.size

    def item(self) -> float:
        return float(self.value)

    def __float__(self) -> float:
        return float(self.value)

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Node({self.op}{label}, shape={self.shape})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, idx):
        return getitem(self, idx)

    @property
    def T(self) -> "Node":
        return transpose(self)


def as_node(x) -> Node:
    return x if isinstance(x, Node) else Node(x, requires_grad=False, op="const")


def constant(x) -> Node:
    return Node(x, requires_grad=False, op="const")


def parameter(x, name: str | None = None) -> Node:
    """A trainable leaf. The payload is copied."""
    return Node(np.array(x, dtype=np.float64), requires_grad=True, name=name)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _check_broadcast(primitive: str, a: Node, b: Node) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(primitive, a.shape, b.shape) from None


def _binary(primitive, a, b, fwd, grads):
    a, b = as_node(a), as_node(b)
    _check_broadcast(primitive, a, b)
    out_value = fwd(a.value, b.value)

    def backward_fn(g):
        ga, gb = grads(g, a.value, b.value, out_value)
        return (
            _unbroadcast(ga, a.shape) if ga is not None else None,
            _unbroadcast(gb, b.shape) if gb is not None else None,
        )

    return Node(out_value, (a, b), primitive, backward_fn)


def add(a, b) -> Node:
    return _binary("add", a, b, np.add, lambda g, x, y, o: (g, g))


def sub(a, b) -> Node:
    return _binary("sub", a, b, np.subtract, lambda g, x, y, o: (g, -g))


def mul(a, b) -> Node:
    return _binary("mul", a, b, np.multiply, lambda g, x, y, o: (g * y, g * x))


def div(a, b) -> Node:
    return _binary("div", a, b, np.divide, lambda g, x, y, o: (g / y, -g * o / y))


def maximum(a, b) -> Node:
    """Elementwise max; ties send the gradient to the first operand."""

    def grads(g, x, y, o):
        pick = x >= y
        return g * pick, g * ~pick

    return _binary("maximum", a, b, np.maximum, grads)


def _unary(primitive, x, fwd, dfn):
    x = as_node(x)
    out_value = fwd(x.value)
    return Node(out_value, (x,), primitive, lambda g: (dfn(g, x.value, out_value),))


def neg(x) -> Node:
    return _unary("neg", x, np.negative, lambda g, v, o: -g)


def exp(x) -> Node:
    return _unary("exp", x, np.exp, lambda g, v, o: g * o)


def log(x) -> Node:
    return _unary("log", x, np.log, lambda g, v, o: g / v)


def _sigmoid(v: np.ndarray) -> np.ndarray:
    # branch-free stable form; exact 0/1 at +-inf
    e = np.exp(-np.abs(v))
    return np.where(v >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _softplus(v: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, v)


def sigmoid(x) -> Node:
    return _unary("sigmoid", x, _sigmoid, lambda g, v, o: g * o * (1.0 - o))


def swish(x) -> Node:
    def fwd(v):
        return v * _sigmoid(v)

    def dfn(g, v, o):
        s = _sigmoid(v)
        return g * (s + v * s * (1.0 - s))

    return _unary("swish", x, fwd, dfn)


def relu(x) -> Node:
    return maximum(x, 0.0)


def softplus(x) -> Node:
    return _unary("softplus", x, _softplus, lambda g, v, o: g * _sigmoid(v))


def square(x) -> Node:
    return _unary("square", x, np.square, lambda g, v, o: 2.0 * g * v)


def sqrt(x) -> Node:
    return _unary("sqrt", x, np.sqrt, lambda g, v, o: 0.5 * g / o)


def _expand_reduced(g: np.ndarray, shape, axis, keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def sum(x, axis=None, keepdims: bool = False) -> Node:  # noqa: A001
    x = as_node(x)
    out = x.value.sum(axis=axis, keepdims=keepdims)
    return Node(out, (x,), "sum", lambda g: (_expand_reduced(g, x.shape, axis, keepdims),))


def mean(x, axis=None, keepdims: bool = False) -> Node:
    x = as_node(x)
    out = x.value.mean(axis=axis, keepdims=keepdims)
    count = x.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])

    def backward_fn(g):
        return (_expand_reduced(g, x.shape, axis, keepdims) / count,)

    return Node(out, (x,), "mean", backward_fn)


def log_sum_exp(x, axis=None, keepdims: bool = False) -> Node:
    """``log(sum(exp(x)))`` with the max factored out."""
    x = as_node(x)
    m = np.max(x.value, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    shifted = np.exp(x.value - m)
    total = shifted.sum(axis=axis, keepdims=True)
    out_keep = np.log(total) + m
    out = out_keep if keepdims else np.squeeze(out_keep, axis=axis)

    def backward_fn(g):
        gk = g if (keepdims or axis is None) else np.expand_dims(g, axis)
        return (gk * shifted / total,)

    return Node(out, (x,), "log_sum_exp", backward_fn)


def broadcast_to(x, shape: tuple[int, ...]) -> Node:
    x = as_node(x)
    try:
        out = np.broadcast_to(x.value, shape).copy()
    except ValueError:
        raise ShapeError("broadcast_to", x.shape, tuple(shape)) from None
    return Node(out, (x,), "broadcast_to", lambda g: (_unbroadcast(g, x.shape),))


def matmul(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    if a.ndim == 0 or b.ndim == 0 or a.ndim > 2 or b.ndim > 2:
        raise ShapeError("matmul", a.shape, b.shape, detail="operands must be 1-D or 2-D")
    if a.shape[-1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape, detail="inner dimensions differ")
    out = a.value @ b.value

    def backward_fn(g):
        av, bv = a.value, b.value
        if av.ndim == 1 and bv.ndim == 1:
            return g * bv, g * av
        if av.ndim == 1:
            return bv @ g, np.outer(av, g)
        if bv.ndim == 1:
            return np.outer(g, bv), av.T @ g
        return g @ bv.T, av.T @ g

    return Node(out, (a, b), "matmul", backward_fn)


def getitem(x, idx) -> Node:
    x = as_node(x)
    out = x.value[idx]

    def backward_fn(g):
        full = np.zeros_like(x.value)
        np.add.at(full, idx, g)
        return (full,)

    return Node(out, (x,), "getitem", backward_fn)


def reshape(x, shape) -> Node:
    x = as_node(x)
    try:
        out = x.value.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", x.shape, tuple(np.atleast_1d(shape))) from None
    return Node(out, (x,), "reshape", lambda g: (g.reshape(x.shape),))


def transpose(x) -> Node:
    x = as_node(x)
    return Node(x.value.T, (x,), "transpose", lambda g: (g.T,))


def straight_through(hard, soft) -> Node:
    """Forward ``hard`` exactly, pass the incoming gradient to ``soft`` unchanged."""
    soft = as_node(soft)
    hard = np.asarray(hard, dtype=np.float64)
    if hard.shape != soft.shape:
        raise ShapeError("straight_through", hard.shape, soft.shape)
    return Node(hard.copy(), (soft,), "straight_through", lambda g: (g,))


def _topological(root: Node) -> list[Node]:
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root: Node) -> None:
    """Accumulate d(root)/d(node) into ``grad`` of every reachable node.

    Leaf gradients accumulate across calls; interior gradients are recomputed.
    """
    if root.size != 1:
        raise ValueError(f"backward: root must be scalar, got shape {root.shape}")
    if not root.requires_grad:
        return
    order = _topological(root)
    for node in order:
        if node.parents:
            node.grad = np.zeros_like(node.value)
    root.grad = root.grad + np.ones_like(root.value)
    for node in reversed(order):
        if not node.parents:
            continue
        parent_grads = node._backward(node.grad)
        for p, g in zip(node.parents, parent_grads):
            if g is None or not p.requires_grad:
                continue
            if p.grad is None:
                p.grad = np.zeros_like(p.value)
            p.grad = p.grad + g


def zero_grad(params: Iterable[Node]) -> None:
    for p in params:
        p.grad = np.zeros_like(p.value)
