"""Reverse-mode automatic differentiation over numpy arrays.

Just enough machinery for the networks in this package: dense layers, a gated
recurrent cell unrolled through full episodes, Gaussian likelihood terms and
the clipped-surrogate policy objective.  Graphs are built eagerly; `backward`
walks them once in reverse topological order.  Rollout-time forwards run under
`no_grad()` so the same network code serves collection and training.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

_GRAD_ENABLED = True


@contextmanager
def no_grad():
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class NonFiniteLossError(RuntimeError):
    """Raised when a loss or gradient turns out NaN/inf."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operator sugar; python scalars take this tensor's dtype so float32
    # graphs stay float32
    def __add__(self, other):
        return add(self, _wrap_like(other, self))

    def __radd__(self, other):
        return add(_wrap_like(other, self), self)

    def __sub__(self, other):
        return sub(self, _wrap_like(other, self))

    def __rsub__(self, other):
        return sub(_wrap_like(other, self), self)

    def __mul__(self, other):
        return mul(self, _wrap_like(other, self))

    def __rmul__(self, other):
        return mul(_wrap_like(other, self), self)

    def __truediv__(self, other):
        return div(self, _wrap_like(other, self))

    def __neg__(self):
        return mul(self, Tensor(np.asarray(-1.0, dtype=self.data.dtype)))

    def __matmul__(self, other):
        return matmul(self, _wrap_like(other, self))

    def backward(self):
        backward(self)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def _wrap_like(x, ref: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    if isinstance(x, (int, float)):
        return Tensor(np.asarray(x, dtype=ref.data.dtype))
    return Tensor(np.asarray(x))


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    # exp(-|x|) never overflows; both branches are algebraically sigmoid(x)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum-reduce `grad` back to `shape` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _node(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    if not _GRAD_ENABLED or not any(p.requires_grad for p in parents):
        return Tensor(data)
    out = Tensor(data, requires_grad=True)
    out._parents = tuple(p for p in parents if p.requires_grad)
    out._backward = backward_fn
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    t.grad = g if t.grad is None else t.grad + g


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data

    def back(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _node(data, (a, b), back)


def sub(a: Tensor, b: Tensor) -> Tensor:
    data = a.data - b.data

    def back(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(-g, b.data.shape))

    return _node(data, (a, b), back)


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data

    def back(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _node(data, (a, b), back)


def div(a: Tensor, b: Tensor) -> Tensor:
    data = a.data / b.data

    def back(g):
        _accum(a, _unbroadcast(g / b.data, a.data.shape))
        _accum(b, _unbroadcast(-g * a.data / b.data**2, b.data.shape))

    return _node(data, (a, b), back)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.data.shape} @ {b.data.shape}")
    data = a.data @ b.data

    def back(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _node(data, (a, b), back)


def tanh(a: Tensor) -> Tensor:
    data = np.tanh(a.data)

    def back(g):
        _accum(a, g * (1.0 - data**2))

    return _node(data, (a,), back)


def sigmoid(a: Tensor) -> Tensor:
    data = _stable_sigmoid(a.data)

    def back(g):
        _accum(a, g * data * (1.0 - data))

    return _node(data, (a,), back)


def exp(a: Tensor) -> Tensor:
    data = np.exp(a.data)

    def back(g):
        _accum(a, g * data)

    return _node(data, (a,), back)


def log(a: Tensor) -> Tensor:
    data = np.log(a.data)

    def back(g):
        _accum(a, g / a.data)

    return _node(data, (a,), back)


def softplus(a: Tensor) -> Tensor:
    data = np.logaddexp(np.asarray(0.0, dtype=a.data.dtype), a.data)

    def back(g):
        _accum(a, g * _stable_sigmoid(a.data))

    return _node(data, (a,), back)


def square(a: Tensor) -> Tensor:
    data = a.data**2

    def back(g):
        _accum(a, g * 2.0 * a.data)

    return _node(data, (a,), back)


def minimum(a: Tensor, b: Tensor) -> Tensor:
    data = np.minimum(a.data, b.data)

    def back(g):
        take_a = a.data <= b.data
        _accum(a, _unbroadcast(g * take_a, a.data.shape))
        _accum(b, _unbroadcast(g * ~take_a, b.data.shape))

    return _node(data, (a, b), back)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    data = np.clip(a.data, lo, hi)

    def back(g):
        _accum(a, g * ((a.data >= lo) & (a.data <= hi)))

    return _node(data, (a,), back)


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = np.sum(a.data, axis=axis, keepdims=keepdims)

    def back(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, a.data.shape).copy())

    return _node(data, (a,), back)


def tmean(a: Tensor, axis=None) -> Tensor:
    n = a.data.size if axis is None else a.data.shape[axis]
    return tsum(a, axis=axis) * (1.0 / n)


def concat(parts: list[Tensor], axis: int = -1) -> Tensor:
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def back(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _accum(p, g[tuple(idx)])

    return _node(data, tuple(parts), back)


def backward(loss: Tensor) -> None:
    """Populate `.grad` for every reachable tensor with requires_grad."""
    if loss.data.size != 1:
        raise ValueError("backward expects a scalar loss")
    if not np.isfinite(loss.data):
        raise NonFiniteLossError(f"loss is not finite: {float(loss.data)}")
    order = _topo_order(loss)
    loss.grad = np.ones_like(loss.data)
    for node in order:
        if node._backward is not None:
            node._backward(node.grad)


def _topo_order(root: Tensor) -> list[Tensor]:
    # Iterative DFS; recursion would overflow on long unrolled episodes.
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    order.reverse()
    return order
