"""Architecture knobs for the token denoiser and embedding refiner."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConfigError


@dataclass(frozen=True)
class DenoiserConfig:
    """Shared sizing for both sequence models.

    num_groups is the number of clean token groups the denoiser predicts
    (and the refiner consumes); the shipped model uses 2, the ablation
    harness sweeps it.
    """

    d_model: int = 32
    td_blocks: int = 4
    er_blocks: int = 2
    num_heads: int = 2
    conv_kernel: int = 7
    ff_expansion: int = 2
    num_groups: int = 2

    def __post_init__(self):
        for name in ("d_model", "td_blocks", "er_blocks", "num_heads", "conv_kernel", "ff_expansion", "num_groups"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.d_model % self.num_heads:
            raise ConfigError(f"d_model {self.d_model} not divisible by {self.num_heads} heads")
        if self.conv_kernel % 2 == 0:
            raise ConfigError(f"conv_kernel must be odd, got {self.conv_kernel}")

    @classmethod
    def desk(cls) -> "DenoiserConfig":
        return cls()

    @classmethod
    def paper_scale(cls) -> "DenoiserConfig":
        """Published sizing: 12 denoiser blocks, 6 refiner blocks."""
        return cls(d_model=256, td_blocks=12, er_blocks=6, num_heads=4, ff_expansion=4)
