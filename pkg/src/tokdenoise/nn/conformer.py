"""Conformer blocks: Macaron feed-forwards, self-attention, depthwise conv.

The block follows the canonical recipe at a desk scale: half-step
feed-forward (expansion 4, swish), multi-head self-attention with absolute
sinusoidal positions added at stack input, a GLU + depthwise-convolution
module, a second half-step feed-forward, and a closing layer norm. The
convolution module normalizes with a layer norm rather than a batch norm so
single-clip inference and tiny batches behave identically.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError
from .layers import DepthwiseConv1d, LayerNorm, Linear, Module, ModuleList
from .tensor import Tensor, softmax


def sinusoidal_positions(length: int, dim: int) -> np.ndarray:
    """Standard sin/cos position table of shape (length, dim)."""
    pos = np.arange(length)[:, None]
    half = np.arange(dim // 2)[None, :]
    angles = pos / np.power(10000.0, 2.0 * half / dim)
    table = np.zeros((length, dim))
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles)
    return table


class FeedForward(Module):
    def __init__(self, dim: int, expansion: int, rng: np.random.Generator):
        self.norm = LayerNorm(dim)
        self.expand = Linear(dim, expansion * dim, rng)
        self.project = Linear(expansion * dim, dim, rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.project(self.expand(self.norm(x)).swish())


class SelfAttention(Module):
    def __init__(self, dim: int, num_heads: int, rng: np.random.Generator):
        if dim % num_heads != 0:
            raise DimensionError(f"width {dim} not divisible by {num_heads} heads")
        self.norm = LayerNorm(dim)
        self.query = Linear(dim, dim, rng)
        self.key = Linear(dim, dim, rng)
        self.value = Linear(dim, dim, rng)
        self.out = Linear(dim, dim, rng)
        self.num_heads = num_heads
        self.head_dim = dim // num_heads

    def forward(self, x: Tensor) -> Tensor:
        b, t, d = x.shape
        h, hd = self.num_heads, self.head_dim
        xn = self.norm(x)

        def split(p: Tensor) -> Tensor:
            return p.reshape(b, t, h, hd).transpose(0, 2, 1, 3)  # (B, H, T, hd)

        q, k, v = split(self.query(xn)), split(self.key(xn)), split(self.value(xn))
        scores = (q @ k.swapaxes(-1, -2)) * (1.0 / np.sqrt(hd))
        mixed = softmax(scores, axis=-1) @ v
        merged = mixed.transpose(0, 2, 1, 3).reshape(b, t, d)
        return self.out(merged)


class ConvModule(Module):
    def __init__(self, dim: int, kernel_size: int, rng: np.random.Generator):
        if kernel_size % 2 == 0:
            raise DimensionError(f"conv kernel width must be odd, got {kernel_size}")
        self.norm = LayerNorm(dim)
        self.gate_in = Linear(dim, 2 * dim, rng)
        self.depthwise = DepthwiseConv1d(dim, kernel_size, rng, padding=kernel_size // 2)
        self.conv_norm = LayerNorm(dim)
        self.project = Linear(dim, dim, rng)
        self.dim = dim

    def forward(self, x: Tensor) -> Tensor:
        d = self.dim
        gates = self.gate_in(self.norm(x))
        glu = gates[..., :d] * gates[..., d:].sigmoid()
        conv = self.depthwise(glu.swapaxes(-1, -2)).swapaxes(-1, -2)
        return self.project(self.conv_norm(conv).swish())


class ConformerBlock(Module):
    """Shape-preserving block over (B, T, dim) sequences."""

    def __init__(self, dim: int, num_heads: int, kernel_size: int, expansion: int, rng: np.random.Generator):
        self.ff_head = FeedForward(dim, expansion, rng)
        self.attention = SelfAttention(dim, num_heads, rng)
        self.conv = ConvModule(dim, kernel_size, rng)
        self.ff_tail = FeedForward(dim, expansion, rng)
        self.final_norm = LayerNorm(dim)
        self.dim = dim

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.dim:
            raise DimensionError(f"conformer block width {self.dim}, input width {x.shape[-1]}")
        x = x + 0.5 * self.ff_head(x)
        x = x + self.attention(x)
        x = x + self.conv(x)
        x = x + 0.5 * self.ff_tail(x)
        return self.final_norm(x)


class ConformerStack(Module):
    """Position encoding plus a pile of blocks."""

    def __init__(self, num_blocks: int, dim: int, num_heads: int, kernel_size: int, expansion: int, rng: np.random.Generator):
        self.blocks = ModuleList(ConformerBlock(dim, num_heads, kernel_size, expansion, rng) for _ in range(num_blocks))
        self.dim = dim

    def forward(self, x: Tensor) -> Tensor:
        x = x + Tensor(sinusoidal_positions(x.shape[-2], self.dim))
        for block in self.blocks:
            x = block(x)
        return x
