"""Parameter containers and the basic neural layers.

Weight matrices are drawn uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) from an
explicitly passed Generator and biases start at zero, so a model is a pure
function of its construction seed.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError
from . import functional as F
from .tensor import Tensor, layer_norm


class Parameter(Tensor):
    """A Tensor that is trained (requires_grad is always on)."""

    def __init__(self, data):
        super().__init__(data, requires_grad=True)


def uniform_init(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Module:
    """Base class: tracks parameters and submodules by attribute name."""

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def named_parameters(self, prefix: str = ""):
        for name, attr in vars(self).items():
            full = f"{prefix}{name}"
            if isinstance(attr, Parameter):
                yield full, attr
            elif isinstance(attr, Module):
                yield from attr.named_parameters(f"{full}.")
            elif isinstance(attr, ModuleList):
                for i, sub in enumerate(attr):
                    yield from sub.named_parameters(f"{full}.{i}.")

    def parameters(self):
        for _, p in self.named_parameters():
            yield p

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self) -> dict:
        return {name: p.data for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict) -> None:
        own = dict(self.named_parameters())
        missing = set(own) - set(state)
        extra = set(state) - set(own)
        if missing or extra:
            raise DimensionError(f"state dict mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, p in own.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.data.shape:
                raise DimensionError(f"parameter {name}: shape {arr.shape} vs expected {p.data.shape}")
            p.data = arr.copy()

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


class ModuleList(list):
    """Plain list of modules that named_parameters knows how to walk."""


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True):
        self.weight = Parameter(uniform_init(rng, (in_features, out_features), in_features))
        self.bias = Parameter(np.zeros(out_features)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.weight.shape[0]:
            raise DimensionError(f"linear: input width {x.shape[-1]} vs weight {self.weight.shape[0]}")
        out = x @ self.weight
        return out + self.bias if self.bias is not None else out


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-6):
        self.gain = Parameter(np.ones(dim))
        self.bias = Parameter(np.zeros(dim))
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gain, self.bias, self.eps)


class Conv1d(Module):
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        stride: int = 1,
        padding: int = 0,
        bias: bool = True,
    ):
        fan_in = in_channels * kernel_size
        self.weight = Parameter(uniform_init(rng, (out_channels, in_channels, kernel_size), fan_in))
        self.bias = Parameter(np.zeros(out_channels)) if bias else None
        self.stride = stride
        self.padding = padding

    def forward(self, x: Tensor) -> Tensor:
        return F.conv1d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class DepthwiseConv1d(Module):
    def __init__(self, channels: int, kernel_size: int, rng: np.random.Generator, padding: int = 0):
        self.weight = Parameter(uniform_init(rng, (channels, kernel_size), kernel_size))
        self.bias = Parameter(np.zeros(channels))
        self.padding = padding

    def forward(self, x: Tensor) -> Tensor:
        return F.depthwise_conv1d(x, self.weight, self.bias, padding=self.padding)


class ConvTranspose1d(Module):
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        stride: int = 1,
        padding: int = 0,
        bias: bool = True,
    ):
        fan_in = in_channels * kernel_size
        self.weight = Parameter(uniform_init(rng, (in_channels, out_channels, kernel_size), fan_in))
        self.bias = Parameter(np.zeros(out_channels)) if bias else None
        self.stride = stride
        self.padding = padding

    def forward(self, x: Tensor) -> Tensor:
        return F.conv_transpose1d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)
