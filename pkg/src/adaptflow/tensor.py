"""Dense float64 tensors with reverse-mode automatic differentiation.

Every differentiable operation records a :class:`Node` holding the parent
tensors and a closure mapping the upstream gradient to one gradient per
parent. :meth:`Tensor.backward` walks the recorded graph in reverse
topological order and *adds* gradients into leaf tensors.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, ValidationError

_grad_enabled = True
_nodes_created = 0


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def is_grad_enabled() -> bool:
    return _grad_enabled


def graph_nodes_created() -> int:
    """Total number of graph nodes built since import (a probe for tests)."""
    return _nodes_created


@dataclass(eq=False)
class Node:
    op: str
    parents: tuple
    backward: Callable[[np.ndarray], tuple]


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "node")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.node: Node | None = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self.node is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __float__(self):
        return self.item()

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({self.data!r}{flag})"

    def detach(self) -> "Tensor":
        return detach(self)

    def zero_grad(self):
        self.grad = None

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division is only supported by a python scalar")
        return mul(self, 1.0 / float(other))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self) -> "Tensor":
        return sum_all(self)

    def mean(self) -> "Tensor":
        return mean_all(self)

    def backward(self):
        backward(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Sequence[Tensor], grad_fn, op: str) -> Tensor:
    global _nodes_created
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.node = None
    out.requires_grad = _grad_enabled and any(p.requires_grad for p in parents)
    if out.requires_grad:
        out.node = Node(op, tuple(parents), grad_fn)
        _nodes_created += 1
    return out


def _same_shape(a: Tensor, b: Tensor, op: str):
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def backward(loss: Tensor):
    """Accumulate d(loss)/d(leaf) into ``leaf.grad`` for every reachable leaf."""
    if loss.data.size != 1:
        raise DimensionError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    order: list[Tensor] = []
    seen: set[int] = set()
    stack = [(loss, False)]
    while stack:
        t, expanded = stack.pop()
        if expanded:
            order.append(t)
            continue
        if id(t) in seen:
            continue
        seen.add(id(t))
        stack.append((t, True))
        if t.node is not None:
            for p in t.node.parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
    grads = {id(loss): np.ones_like(loss.data)}
    for t in reversed(order):
        g = grads.pop(id(t), None)
        if g is None:
            continue
        if t.node is None:
            t.grad = g.copy() if t.grad is None else t.grad + g
            continue
        for p, pg in zip(t.node.parents, t.node.backward(g)):
            if pg is None or not p.requires_grad:
                continue
            key = id(p)
            grads[key] = pg if key not in grads else grads[key] + pg


# ---------------------------------------------------------------------------
# elementwise and reduction primitives
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a = as_tensor(a)
    if not isinstance(b, Tensor):
        c = float(b)
        return _make(a.data + c, (a,), lambda g: (g,), "add_scalar")
    _same_shape(a, b, "add")
    return _make(a.data + b.data, (a, b), lambda g: (g, g), "add")


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, (a,), lambda g: (-g,), "neg")


def sub(a, b) -> Tensor:
    if not isinstance(b, Tensor):
        return add(a, -float(b))
    a = as_tensor(a)
    _same_shape(a, b, "sub")
    return _make(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a, b) -> Tensor:
    a = as_tensor(a)
    if not isinstance(b, Tensor):
        c = float(b)
        return _make(a.data * c, (a,), lambda g: (g * c,), "mul_scalar")
    _same_shape(a, b, "mul")
    ad, bd = a.data, b.data
    return _make(ad * bd, (a, b), lambda g: (g * bd, g * ad), "mul")


def sum_all(a: Tensor) -> Tensor:
    shape = a.shape
    return _make(np.asarray(a.data.sum()), (a,), lambda g: (np.full(shape, float(g)),), "sum")


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    shape = a.shape
    return _make(
        np.asarray(a.data.sum() / n), (a,), lambda g: (np.full(shape, float(g) / n),), "mean"
    )


def abs_(a: Tensor) -> Tensor:
    sign = np.sign(a.data)
    return _make(np.abs(a.data), (a,), lambda g: (g * sign,), "abs")


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _make(np.where(mask | np.isnan(a.data), a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data
    return _make(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g), "matmul")


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight.T + bias`` with the bias broadcast over rows."""
    if x.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise DimensionError(
            f"linear: input shape {x.shape} incompatible with weight shape {weight.shape}"
        )
    xd, wd = x.data, weight.data
    # einsum keeps each output row independent of batch size (BLAS does not)
    out = np.einsum("bi,oi->bo", xd, wd)
    if bias is None:
        return _make(out, (x, weight), lambda g: (g @ wd, g.T @ xd), "linear")
    out = out + bias.data
    return _make(
        out, (x, weight, bias), lambda g: (g @ wd, g.T @ xd, g.sum(axis=0)), "linear"
    )


# ---------------------------------------------------------------------------
# losses and special functions
# ---------------------------------------------------------------------------


def _check_matrix(x: Tensor, op: str):
    if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] == 0:
        raise DimensionError(f"{op}: expected a non-empty [B x C] matrix, got shape {x.shape}")


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def softmax_rows(x: Tensor) -> Tensor:
    _check_matrix(x, "softmax_rows")
    y = _softmax(x.data)

    def grad_fn(g):
        return (y * (g - (g * y).sum(axis=1, keepdims=True)),)

    return _make(y, (x,), grad_fn, "softmax_rows")


def _as_labels(labels, batch: int, n_classes: int) -> np.ndarray:
    raw = labels.data if isinstance(labels, Tensor) else np.asarray(labels)
    lab = np.asarray(raw).reshape(-1)
    if lab.shape[0] != batch:
        raise ValidationError(f"expected {batch} labels, got {lab.shape[0]}")
    as_int = lab.astype(np.int64)
    if not np.array_equal(as_int, lab) or as_int.min(initial=0) < 0 or as_int.max(initial=0) >= n_classes:
        raise ValidationError(f"labels must be integers in [0, {n_classes})")
    return as_int


def cross_entropy_mean(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of integer ``labels`` under ``softmax(logits)``."""
    _check_matrix(logits, "cross_entropy_mean")
    b, c = logits.shape
    y = _as_labels(labels, b, c)
    z = logits.data
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    rows = np.arange(b)
    value = np.mean(lse - z[rows, y])

    def grad_fn(g):
        d = _softmax(z)
        d[rows, y] -= 1.0
        return (d * (float(g) / b),)

    return _make(np.asarray(value), (logits,), grad_fn, "cross_entropy")


def bce_with_logits_mean(logits: Tensor, targets) -> Tensor:
    t = targets.data if isinstance(targets, Tensor) else np.asarray(targets, dtype=np.float64)
    if t.shape != logits.shape:
        raise DimensionError(f"bce: logits {logits.shape} vs targets {t.shape}")
    if not np.all((t == 0.0) | (t == 1.0)):
        raise ValidationError("bce targets must be exactly 0 or 1")
    z = logits.data
    n = z.size
    value = np.mean(np.maximum(z, 0.0) - z * t + np.log1p(np.exp(-np.abs(z))))

    def grad_fn(g):
        e = np.exp(-np.abs(z))
        sig = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
        return ((sig - t) * (float(g) / n),)

    return _make(np.asarray(value), (logits,), grad_fn, "bce_with_logits")


def l2_norm(x: Tensor) -> Tensor:
    """Frobenius norm; the gradient at the zero tensor is taken to be zero."""
    xd = x.data
    norm = float(np.sqrt(np.sum(xd * xd)))

    def grad_fn(g):
        if norm == 0.0:
            return (np.zeros_like(xd),)
        return (xd * (float(g) / norm),)

    return _make(np.asarray(norm), (x,), grad_fn, "l2_norm")


def grad_reverse(x: Tensor, lam: float = 1.0) -> Tensor:
    """Identity on the forward pass; multiplies the gradient by ``-lam`` going back."""
    lam = float(lam)
    if not np.isfinite(lam):
        raise ValidationError("grad_reverse lambda must be finite")
    return _make(x.data, (x,), lambda g: (g * -lam,), "grad_reverse")


def detach(x: Tensor) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = x.data
    out.requires_grad = False
    out.grad = None
    out.node = None
    return out


def custom_op(data: np.ndarray, parents: Sequence[Tensor], grad_fn, op: str) -> Tensor:
    """Record an operation whose backward is supplied by the caller."""
    return _make(np.asarray(data, dtype=np.float64), parents, grad_fn, op)
