"""Codec hyperparameter bundle."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError


@dataclass
class CodecConfig:
    """Architecture of the convolutional codec and its residual quantizer.

    downsample_rate is the product of the encoder strides; the decoder
    mirrors the strides in reverse. The desk-scale default keeps the
    reference ratios (downsample 640 -> 64, 32 stages -> 8, 1024 codes ->
    64, width 128 -> 32) at a size a single CPU can train.
    """

    strides: tuple = (2, 2, 4, 4)
    channels: tuple = (32, 32, 64, 64)  # output width of each downsampling block
    stem_channels: int = 32
    num_quantizers: int = 8  # K
    codebook_size: int = 64  # C
    latent_dim: int = 32  # D

    def __post_init__(self):
        if len(self.strides) != len(self.channels):
            raise ConfigError(f"{len(self.strides)} strides vs {len(self.channels)} channel widths")
        if min(self.strides) < 1:
            raise ConfigError("strides must be positive")
        if self.num_quantizers < 1 or self.codebook_size < 1 or self.latent_dim < 1:
            raise ConfigError("quantizer count, codebook size and latent dim must be positive")
        if self.codebook_size > 65536:
            raise ConfigError("codebook size must fit in u16 for the token file format")

    @property
    def downsample_rate(self) -> int:
        """M: latent frame hop in samples."""
        return int(np.prod(self.strides))

    @classmethod
    def desk(cls) -> "CodecConfig":
        return cls()

    @classmethod
    def paper_scale(cls) -> "CodecConfig":
        """Reference-scale shape (not trainable on a desk; for FLOPs math)."""
        return cls(
            strides=(2, 4, 5, 8, 2),
            channels=(64, 128, 256, 512, 512),
            stem_channels=32,
            num_quantizers=32,
            codebook_size=1024,
            latent_dim=128,
        )
