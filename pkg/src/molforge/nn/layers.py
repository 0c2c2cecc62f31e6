"""Transformer building blocks on the Tensor engine.

Layer order follows the pre-norm equations: the input is layer-normalized
before attention, residuals are added un-normalized, and the feedforward
block is a 2-layer MLP with GELU and hidden width ``ffn_ratio * d``.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ShapeMismatch
from .tensor import Tensor, parameter

NEG_INF = -1e30          # large-negative stand-in for -inf inside softmax


class Module:
    """Lightweight container with recursive named-parameter traversal."""

    def named_parameters(self, prefix: str = ""):
        for name, value in vars(self).items():
            full = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{full}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{i}.")
                    elif isinstance(item, Tensor) and item.requires_grad:
                        yield f"{full}.{i}", item

    def parameters(self):
        return [p for _, p in self.named_parameters()]


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng, zero_init: bool = False):
        if zero_init:
            self.weight = parameter(np.zeros((n_in, n_out)))
        else:
            self.weight = parameter((n_in, n_out), rng)
        self.bias = parameter(np.zeros(n_out))

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.weight + self.bias


class LayerNorm(Module):
    def __init__(self, d: int):
        self.gain = parameter(np.ones(d))
        self.shift = parameter(np.zeros(d))

    def __call__(self, x: Tensor) -> Tensor:
        return x.layernorm() * self.gain + self.shift


class FeedForward(Module):
    """2-layer MLP with GELU, the transformer position-wise block."""

    def __init__(self, d: int, rng, ratio: int = 4):
        self.fc1 = Linear(d, ratio * d, rng)
        self.fc2 = Linear(ratio * d, d, rng)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(self.fc1(x).gelu())


class MLP(Module):
    """2-layer GELU MLP mapping ``n_in -> d`` (numeric / query encoders)."""

    def __init__(self, n_in: int, d: int, rng):
        self.fc1 = Linear(n_in, d, rng)
        self.fc2 = Linear(d, d, rng)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(self.fc1(x).gelu())


class SineMLP(Module):
    """2-layer MLP ``n_in -> d`` with a sine hidden activation.

    Used for the query encoder: smooth activations on raw coordinates fit
    low frequencies first (spectral bias), which starves oscillatory
    solution fields within a small step budget. The first layer starts as
    a log-spaced frequency bank over random input directions with random
    phases; all weights remain trainable, so this is still an ordinary
    2-layer MLP with sin in place of GELU.
    """

    def __init__(self, n_in: int, d: int, rng, f_min: float = 0.5,
                 f_max: float = 64.0):
        freqs = 2.0 * np.pi * np.exp(
            np.linspace(np.log(f_min), np.log(f_max), d))
        dirs = rng.standard_normal((n_in, d))
        dirs /= np.linalg.norm(dirs, axis=0, keepdims=True)
        self.w1 = Tensor(dirs * freqs, requires_grad=True)
        self.b1 = Tensor(rng.uniform(0.0, 2.0 * np.pi, size=d),
                         requires_grad=True)
        self.out = Linear(d, d, rng)

    def __call__(self, x: Tensor) -> Tensor:
        return self.out((x @ self.w1 + self.b1).sin())


def attention(q: Tensor, k: Tensor, v: Tensor,
              mask: np.ndarray | None = None) -> Tensor:
    """softmax(Q K^T / sqrt(d_K) + mask) V along the last two axes.

    ``mask`` is boolean, True = blocked; blocked scores are driven to a
    large negative value before the softmax.
    """
    if q.shape[-1] != k.shape[-1]:
        raise ShapeMismatch(f"query dim {q.shape[-1]} != key dim {k.shape[-1]}")
    if k.shape[-2] != v.shape[-2]:
        raise ShapeMismatch("key and value counts differ")
    scores = (q @ k.transpose()) * (1.0 / math.sqrt(q.shape[-1]))
    if mask is not None:
        scores = scores.masked_fill(np.broadcast_to(mask, scores.shape), NEG_INF)
    return scores.softmax(axis=-1) @ v


class MultiHeadAttention(Module):
    """h heads of projected attention, concatenated and re-projected."""

    def __init__(self, d: int, h: int, rng):
        if d % h != 0:
            raise ShapeMismatch(f"d={d} not divisible by h={h}")
        self.d, self.h = d, h
        self.w_q = parameter((d, d), rng)
        self.w_k = parameter((d, d), rng)
        self.w_v = parameter((d, d), rng)
        self.w_o = parameter((d, d), rng)

    def _split(self, x: Tensor, n: int) -> Tensor:
        # [n, d] -> [h, n, d/h]
        return x.reshape(n, self.h, self.d // self.h).transpose(0, 1)

    def __call__(self, q: Tensor, k: Tensor, v: Tensor,
                 mask: np.ndarray | None = None) -> Tensor:
        n_q, n_k = q.shape[-2], k.shape[-2]
        qh = self._split(q @ self.w_q, n_q)
        kh = self._split(k @ self.w_k, n_k)
        vh = self._split(v @ self.w_v, n_k)
        out = attention(qh, kh, vh, mask)          # [h, n_q, d/h]
        out = out.transpose(0, 1).reshape(n_q, self.d)
        return out @ self.w_o


class TransformerLayer(Module):
    """Pre-norm self-attention block:

        X' = LayerNorm(X); Y = X + MHA(X', X', X'); out = Y + FFN(LayerNorm(Y))
    """

    def __init__(self, d: int, h: int, rng, ffn_ratio: int = 4):
        self.norm1 = LayerNorm(d)
        self.attn = MultiHeadAttention(d, h, rng)
        self.norm2 = LayerNorm(d)
        self.ffn = FeedForward(d, rng, ffn_ratio)

    def __call__(self, x: Tensor, mask: np.ndarray | None = None) -> Tensor:
        xn = self.norm1(x)
        y = x + self.attn(xn, xn, xn, mask)
        return y + self.ffn(self.norm2(y))


class CrossAttentionLayer(Module):
    """Data-decoder block: queries cross-attend to the prompt memory.

    There is deliberately no self-attention among queries, so each query
    row is computed independently of every other query.
    """

    def __init__(self, d: int, h: int, rng, ffn_ratio: int = 4):
        self.norm_q = LayerNorm(d)
        self.norm_kv = LayerNorm(d)
        self.attn = MultiHeadAttention(d, h, rng)
        self.norm2 = LayerNorm(d)
        self.ffn = FeedForward(d, rng, ffn_ratio)

    def __call__(self, queries: Tensor, memory: Tensor,
                 mask: np.ndarray | None = None) -> Tensor:
        mn = self.norm_kv(memory)
        y = queries + self.attn(self.norm_q(queries), mn, mn, mask)
        return y + self.ffn(self.norm2(y))


def causal_mask(n: int) -> np.ndarray:
    """Boolean [n, n] mask, True above the diagonal (future positions)."""
    return np.triu(np.ones((n, n), dtype=bool), k=1)
