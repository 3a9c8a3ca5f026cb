"""Minimal tape-based reverse-mode automatic differentiation on numpy arrays.

Only the primitives needed by the actor-critic loss are supported: dense
algebra, tanh/relu, log-softmax, gather, exp/log, clip, minimum, reductions.
All arithmetic is float64.

Subgradient conventions at non-differentiable points follow the "first
branch" rule: ``clip`` passes gradient when ``lo <= x <= hi`` and
``minimum(a, b)`` routes gradient to ``a`` when ``a <= b``.
"""
from __future__ import annotations

import numpy as np

from .kernels import dense


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("value", "grad", "_parents", "_backward")
    __array_priority__ = 100

    def __init__(self, value, parents=(), backward=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Tensor({self.value!r})"

    # -- graph traversal ---------------------------------------------------

    def backward(self):
        """Accumulate d(self)/d(leaf) into ``.grad`` of every reachable node."""
        if self.value.size != 1:
            raise ValueError("backward() requires a scalar output")
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        for node in order:
            node.grad = None
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad = self.grad + g

    # -- operators ---------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division by a Tensor is not supported")
        return mul(self, 1.0 / other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.value + b.value, (a, b))

    def backward(g):
        a._accumulate(_unbroadcast(g, a.shape))
        b._accumulate(_unbroadcast(g, b.shape))

    out._backward = backward
    return out


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.value * b.value, (a, b))

    def backward(g):
        a._accumulate(_unbroadcast(g * b.value, a.shape))
        b._accumulate(_unbroadcast(g * a.value, b.shape))

    out._backward = backward
    return out


def neg(a) -> Tensor:
    out = Tensor(-a.value, (a,))
    out._backward = lambda g: a._accumulate(-g)
    return out


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.value @ b.value, (a, b))

    def backward(g):
        a._accumulate(g @ b.value.T)
        b._accumulate(a.value.T @ g)

    out._backward = backward
    return out


def linear(x, w, b) -> Tensor:
    """``x @ w + b`` with a row-independent forward product."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    out = Tensor(dense(x.value, w.value, b.value), (x, w, b))

    def backward(g):
        x._accumulate(g @ w.value.T)
        w._accumulate(x.value.T @ g)
        b._accumulate(g.sum(axis=0))

    out._backward = backward
    return out


def reshape(a, shape) -> Tensor:
    out = Tensor(a.value.reshape(shape), (a,))
    out._backward = lambda g: a._accumulate(g.reshape(a.shape))
    return out


def getitem(a, idx) -> Tensor:
    out = Tensor(a.value[idx], (a,))

    def backward(g):
        full = np.zeros_like(a.value)
        if isinstance(idx, slice):
            full[idx] += g
        else:
            np.add.at(full, idx, g)
        a._accumulate(full)

    out._backward = backward
    return out


def tanh(a) -> Tensor:
    y = np.tanh(a.value)
    out = Tensor(y, (a,))
    out._backward = lambda g: a._accumulate(g * (1.0 - y * y))
    return out


def relu(a) -> Tensor:
    mask = a.value > 0
    out = Tensor(np.where(mask, a.value, 0.0), (a,))
    out._backward = lambda g: a._accumulate(g * mask)
    return out


def exp(a) -> Tensor:
    y = np.exp(a.value)
    out = Tensor(y, (a,))
    out._backward = lambda g: a._accumulate(g * y)
    return out


def log(a) -> Tensor:
    out = Tensor(np.log(a.value), (a,))
    out._backward = lambda g: a._accumulate(g / a.value)
    return out


def square(a) -> Tensor:
    out = Tensor(a.value * a.value, (a,))
    out._backward = lambda g: a._accumulate(2.0 * g * a.value)
    return out


def sum(a, axis=None) -> Tensor:  # noqa: A001 - mirrors numpy naming
    out = Tensor(np.sum(a.value, axis=axis), (a,))

    def backward(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.shape))

    out._backward = backward
    return out


def mean(a, axis=None) -> Tensor:
    n = a.value.size if axis is None else a.value.shape[axis]
    return sum(a, axis) * (1.0 / n)


def log_softmax(a) -> Tensor:
    """Row-wise log-softmax over the last axis, max-subtracted."""
    z = a.value - np.max(a.value, axis=-1, keepdims=True)
    logsum = np.log(np.sum(np.exp(z), axis=-1, keepdims=True))
    y = z - logsum
    out = Tensor(y, (a,))

    def backward(g):
        p = np.exp(y)
        a._accumulate(g - p * np.sum(g, axis=-1, keepdims=True))

    out._backward = backward
    return out


def take_rows(a, cols) -> Tensor:
    """``a[i, cols[i]]`` for every row i."""
    cols = np.asarray(cols, dtype=np.int64)
    rows = np.arange(a.shape[0])
    out = Tensor(a.value[rows, cols], (a,))

    def backward(g):
        full = np.zeros_like(a.value)
        full[rows, cols] = g
        a._accumulate(full)

    out._backward = backward
    return out


def clip(a, lo: float, hi: float) -> Tensor:
    inside = (a.value >= lo) & (a.value <= hi)
    out = Tensor(np.clip(a.value, lo, hi), (a,))
    out._backward = lambda g: a._accumulate(g * inside)
    return out


def minimum(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    first = a.value <= b.value
    out = Tensor(np.where(first, a.value, b.value), (a, b))

    def backward(g):
        a._accumulate(_unbroadcast(g * first, a.shape))
        b._accumulate(_unbroadcast(g * ~first, b.shape))

    out._backward = backward
    return out
