from . import functional
from .checkpoint import load_records, save_records
from .conformer import ConformerBlock, ConformerStack, sinusoidal_positions
from .functional import (
    conv1d,
    conv_transpose1d,
    cross_entropy_from_logits,
    depthwise_conv1d,
    stft_magnitude,
)
from .layers import Conv1d, ConvTranspose1d, DepthwiseConv1d, LayerNorm, Linear, Module, ModuleList, Parameter
from .optim import Adam, warmup_lr
from .tensor import Tensor, concat, layer_norm, log_softmax, no_grad, pad_last, softmax, stack

__all__ = [
    "Adam",
    "ConformerBlock",
    "ConformerStack",
    "Conv1d",
    "ConvTranspose1d",
    "DepthwiseConv1d",
    "LayerNorm",
    "Linear",
    "Module",
    "ModuleList",
    "Parameter",
    "Tensor",
    "concat",
    "conv1d",
    "conv_transpose1d",
    "cross_entropy_from_logits",
    "depthwise_conv1d",
    "functional",
    "layer_norm",
    "load_records",
    "log_softmax",
    "no_grad",
    "pad_last",
    "save_records",
    "sinusoidal_positions",
    "softmax",
    "stack",
    "stft_magnitude",
    "warmup_lr",
]
