"""Minimal dense-tensor reverse-mode autodiff engine on numpy.

Design: a ``Tensor`` wraps an ndarray plus an optional gradient and a
closure that propagates incoming cotangents to its parents. ``backward``
topologically sorts the recorded graph and runs the closures once; the
graph is freed afterwards, and a second ``backward`` without a fresh
forward pass is an error.

Precision is global and switchable (float32 for training, float64 for
gradient verification) via ``set_dtype``.
"""

from __future__ import annotations

import numpy as np

from ..errors import DisconnectedGraph, ShapeMismatch

_DTYPE = np.float32


def set_dtype(dtype) -> None:
    global _DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError("supported dtypes are float32 and float64")
    _DTYPE = dtype.type


def get_dtype():
    return _DTYPE


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (reverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents",
                 "_consumed")

    def __init__(self, data, requires_grad: bool = False):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=_DTYPE)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._backward = None
        self._parents = ()
        self._consumed = False

    # -- construction helpers -------------------------------------------
    @classmethod
    def _from_op(cls, data, parents, backward) -> "Tensor":
        out = cls(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={'set' if self.grad is not None else 'none'})"

    # -- gradient plumbing ----------------------------------------------
    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, grad: np.ndarray) -> None:
        grad = _unbroadcast(np.asarray(grad, dtype=_DTYPE), self.data.shape)
        self.grad = grad if self.grad is None else self.grad + grad

    def backward(self) -> None:
        if self.data.size != 1:
            raise ShapeMismatch("backward() requires a scalar loss")
        if self._consumed:
            raise DisconnectedGraph(
                "backward() called twice on the same recorded graph; "
                "re-run the forward pass first")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
            node._consumed = True
            # free the graph: closures hold the only refs to intermediates
            if node is not self:
                node._backward = None
                node._parents = ()

    # -- arithmetic ------------------------------------------------------
    def _coerce(self, other) -> "Tensor":
        return other if isinstance(other, Tensor) else Tensor(other)

    def __add__(self, other):
        other = self._coerce(other)
        a, b = self, other

        def bwd(g):
            if a.requires_grad:
                a._accumulate(g)
            if b.requires_grad:
                b._accumulate(g)
        return Tensor._from_op(a.data + b.data, (a, b), bwd)

    __radd__ = __add__

    def __neg__(self):
        a = self

        def bwd(g):
            a._accumulate(-g)
        return Tensor._from_op(-a.data, (a,), bwd)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        a, b = self, other

        def bwd(g):
            if a.requires_grad:
                a._accumulate(g * b.data)
            if b.requires_grad:
                b._accumulate(g * a.data)
        return Tensor._from_op(a.data * b.data, (a, b), bwd)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        a, b = self, other

        def bwd(g):
            if a.requires_grad:
                a._accumulate(g / b.data)
            if b.requires_grad:
                b._accumulate(-g * a.data / (b.data * b.data))
        return Tensor._from_op(a.data / b.data, (a, b), bwd)

    def __pow__(self, exponent: float):
        a = self
        e = float(exponent)

        def bwd(g):
            a._accumulate(g * e * a.data ** (e - 1.0))
        return Tensor._from_op(a.data ** e, (a,), bwd)

    def matmul(self, other):
        other = self._coerce(other)
        a, b = self, other

        def bwd(g):
            if a.requires_grad:
                ga = g @ np.swapaxes(b.data, -1, -2)
                a._accumulate(_unbroadcast(ga, a.data.shape))
            if b.requires_grad:
                gb = np.swapaxes(a.data, -1, -2) @ g
                b._accumulate(_unbroadcast(gb, b.data.shape))
        return Tensor._from_op(a.data @ b.data, (a, b), bwd)

    __matmul__ = matmul

    # -- shape ops -------------------------------------------------------
    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self
        old = a.data.shape

        def bwd(g):
            a._accumulate(g.reshape(old))
        return Tensor._from_op(a.data.reshape(shape), (a,), bwd)

    def transpose(self, axis1: int = -2, axis2: int = -1):
        a = self

        def bwd(g):
            a._accumulate(np.swapaxes(g, axis1, axis2))
        return Tensor._from_op(np.swapaxes(a.data, axis1, axis2), (a,), bwd)

    def __getitem__(self, key):
        a = self

        def bwd(g):
            full = np.zeros_like(a.data)
            np.add.at(full, key, g)
            a._accumulate(full)
        return Tensor._from_op(a.data[key], (a,), bwd)

    @staticmethod
    def concat(tensors: list, axis: int = 0) -> "Tensor":
        tensors = [t if isinstance(t, Tensor) else Tensor(t) for t in tensors]
        sizes = [t.data.shape[axis] for t in tensors]
        splits = np.cumsum(sizes)[:-1]

        def bwd(g):
            for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
                if t.requires_grad:
                    t._accumulate(piece)
        return Tensor._from_op(np.concatenate([t.data for t in tensors], axis=axis),
                               tuple(tensors), bwd)

    # -- reductions ------------------------------------------------------
    def sum(self, axis=None, keepdims: bool = False):
        a = self

        def bwd(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g, a.data.shape))
        return Tensor._from_op(a.data.sum(axis=axis, keepdims=keepdims), (a,), bwd)

    def mean(self, axis=None, keepdims: bool = False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    # -- elementwise nonlinearities -------------------------------------
    def exp(self):
        a = self
        out_data = np.exp(a.data)

        def bwd(g):
            a._accumulate(g * out_data)
        return Tensor._from_op(out_data, (a,), bwd)

    def log(self):
        a = self

        def bwd(g):
            a._accumulate(g / a.data)
        return Tensor._from_op(np.log(a.data), (a,), bwd)

    def sqrt(self):
        a = self
        out_data = np.sqrt(a.data)

        def bwd(g):
            a._accumulate(g * 0.5 / out_data)
        return Tensor._from_op(out_data, (a,), bwd)

    def sin(self):
        a = self

        def bwd(g):
            a._accumulate(g * np.cos(a.data))
        return Tensor._from_op(np.sin(a.data), (a,), bwd)

    def tanh(self):
        a = self
        out_data = np.tanh(a.data)

        def bwd(g):
            a._accumulate(g * (1.0 - out_data * out_data))
        return Tensor._from_op(out_data, (a,), bwd)

    def gelu(self):
        """Gaussian error linear unit (tanh approximation)."""
        a = self
        c = np.sqrt(2.0 / np.pi).astype(_DTYPE)
        x = a.data
        inner = c * (x + 0.044715 * x ** 3)
        t = np.tanh(inner)
        out_data = 0.5 * x * (1.0 + t)

        def bwd(g):
            dinner = c * (1.0 + 3 * 0.044715 * x ** 2)
            da = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner
            a._accumulate(g * da)
        return Tensor._from_op(out_data, (a,), bwd)

    # -- fused ops -------------------------------------------------------
    def softmax(self, axis: int = -1):
        a = self
        shifted = a.data - a.data.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        out_data = e / e.sum(axis=axis, keepdims=True)

        def bwd(g):
            dot = (g * out_data).sum(axis=axis, keepdims=True)
            a._accumulate(out_data * (g - dot))
        return Tensor._from_op(out_data, (a,), bwd)

    def log_softmax(self, axis: int = -1):
        a = self
        shifted = a.data - a.data.max(axis=axis, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        out_data = shifted - lse
        soft = np.exp(out_data)

        def bwd(g):
            a._accumulate(g - soft * g.sum(axis=axis, keepdims=True))
        return Tensor._from_op(out_data, (a,), bwd)

    def layernorm(self, eps: float = 1e-5):
        """Normalize the last axis to zero mean / unit variance (no affine)."""
        a = self
        mu = a.data.mean(axis=-1, keepdims=True)
        xc = a.data - mu
        var = (xc * xc).mean(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(var + eps)
        out_data = xc * inv
        n = a.data.shape[-1]

        def bwd(g):
            gx = g * inv
            a._accumulate(gx - gx.mean(axis=-1, keepdims=True)
                          - out_data * (gx * out_data).mean(axis=-1, keepdims=True))
        return Tensor._from_op(out_data, (a,), bwd)

    def embedding(self, ids: np.ndarray):
        """Row gather: self is a [V, d] table, ids an integer array."""
        a = self
        ids = np.asarray(ids, dtype=np.int64)

        def bwd(g):
            full = np.zeros_like(a.data)
            np.add.at(full, ids, g)
            a._accumulate(full)
        return Tensor._from_op(a.data[ids], (a,), bwd)

    def masked_fill(self, mask: np.ndarray, value: float):
        """Where ``mask`` is True, replace entries with ``value``."""
        a = self
        mask = np.asarray(mask, dtype=bool)

        def bwd(g):
            a._accumulate(np.where(mask, 0.0, g))
        return Tensor._from_op(np.where(mask, _DTYPE(value), a.data), (a,), bwd)


def parameter(data, rng: np.random.Generator | None = None,
              std: float = 0.02) -> Tensor:
    """A trainable tensor; if ``data`` is a shape tuple, init trunc-normal."""
    if isinstance(data, tuple):
        if rng is None:
            raise ValueError("shape-based init needs an rng")
        draws = rng.normal(0.0, std, size=data)
        # truncate at 2 std by redrawing out-of-range entries
        bad = np.abs(draws) > 2 * std
        while np.any(bad):
            draws[bad] = rng.normal(0.0, std, size=int(bad.sum()))
            bad = np.abs(draws) > 2 * std
        data = draws
    t = Tensor(np.asarray(data), requires_grad=True)
    return t
