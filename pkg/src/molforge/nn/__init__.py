"""Dense-tensor autodiff engine and transformer primitives."""

from .checkpoint import load_checkpoint, save_checkpoint
from .layers import (CrossAttentionLayer, FeedForward, Linear, LayerNorm, MLP,
                     Module, MultiHeadAttention, SineMLP, TransformerLayer,
                     attention, causal_mask)
from .optim import Adam, clip_grad_norm
from .tensor import Tensor, get_dtype, parameter, set_dtype

__all__ = [
    "Tensor", "parameter", "set_dtype", "get_dtype",
    "Module", "Linear", "LayerNorm", "FeedForward", "MLP", "SineMLP",
    "MultiHeadAttention", "TransformerLayer", "CrossAttentionLayer",
    "attention", "causal_mask",
    "Adam", "clip_grad_norm",
    "save_checkpoint", "load_checkpoint",
]
