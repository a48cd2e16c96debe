"""Analytic FLOPs accounting for a 1-second input.

Counts multiply-add-bearing layers only (linears, convolutions, attention
score/value products, codebook searches) at 2 FLOPs per multiply-add.
Normalizations, activations and residual adds are excluded; the convention
matters less than the totals being exact integers so trends are noise-free.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..audio.clip import SAMPLE_RATE
from ..codec.config import CodecConfig
from ..denoiser.config import DenoiserConfig


def linear_flops(t: int, d_in: int, d_out: int) -> int:
    return 2 * t * d_in * d_out


def conv_flops(l_out: int, kernel: int, ch_in: int, ch_out: int, groups: int = 1) -> int:
    return 2 * l_out * kernel * ch_in * ch_out // groups


def conv_transpose_flops(l_in: int, kernel: int, ch_in: int, ch_out: int) -> int:
    # every input frame multiplies the full kernel
    return 2 * l_in * kernel * ch_in * ch_out


def attention_flops(t: int, d_model: int) -> int:
    # scores QK^T and the value mix each cost T^2 * head_dim MACs per head;
    # summed over heads that is 2 * T^2 * d_model MACs, plus 4 projections.
    return 2 * (2 * t * t * d_model) + 4 * linear_flops(t, d_model, d_model)


def conformer_block_flops(t: int, d_model: int, kernel: int, expansion: int) -> int:
    ff = linear_flops(t, d_model, expansion * d_model) + linear_flops(t, expansion * d_model, d_model)
    conv_module = (
        linear_flops(t, d_model, 2 * d_model)
        + conv_flops(t, kernel, d_model, d_model, groups=d_model)
        + linear_flops(t, d_model, d_model)
    )
    return 2 * ff + attention_flops(t, d_model) + conv_module


@dataclass
class FlopsBreakdown:
    """Named per-layer counts; section totals are exact sums of their rows."""

    rows: list = field(default_factory=list)  # (name, flops) pairs

    def add(self, name: str, flops: int) -> None:
        self.rows.append((name, int(flops)))

    def section(self, prefix: str) -> int:
        return sum(f for name, f in self.rows if name.startswith(prefix))

    @property
    def encoder_total(self) -> int:
        return self.section("codec.encoder") + self.section("codec.quantizer")

    @property
    def decoder_total(self) -> int:
        return self.section("codec.decoder")

    @property
    def denoiser_total(self) -> int:
        return self.section("denoiser")

    @property
    def refiner_total(self) -> int:
        return self.section("refiner")

    @property
    def total(self) -> int:
        return sum(f for _, f in self.rows)

    def table(self) -> str:
        width = max(len(name) for name, _ in self.rows) + 2
        lines = [f"{name:<{width}}{f:>16,}" for name, f in self.rows]
        lines.append("-" * (width + 16))
        for label, value in (
            ("codec encoder", self.encoder_total),
            ("codec decoder", self.decoder_total),
            ("token denoiser", self.denoiser_total),
            ("embedding refiner", self.refiner_total),
            ("total", self.total),
        ):
            lines.append(f"{label:<{width}}{value:>16,}")
        return "\n".join(lines)


def flops_estimate(
    codec_config: CodecConfig | None = None,
    denoiser_config: DenoiserConfig | None = None,
    duration_s: float = 1.0,
) -> FlopsBreakdown:
    """Per-layer FLOPs of the full enhance path on a duration_s input."""
    cc = codec_config or CodecConfig.desk()
    dc = denoiser_config or DenoiserConfig.desk()
    length = int(round(SAMPLE_RATE * duration_s))
    bd = FlopsBreakdown()

    # encoder: stem, strided blocks, projection
    l = length
    bd.add("codec.encoder.stem", conv_flops(l, 7, 1, cc.stem_channels))
    ch = cc.stem_channels
    for i, (stride, width) in enumerate(zip(cc.strides, cc.channels)):
        l //= stride
        bd.add(f"codec.encoder.block{i}", conv_flops(l, 2 * stride, ch, width))
        ch = width
    bd.add("codec.encoder.proj", conv_flops(l, 3, ch, cc.latent_dim))
    t = l

    bd.add("codec.quantizer.search", 2 * t * cc.codebook_size * cc.latent_dim * cc.num_quantizers)

    # token denoiser on T frames
    d, c = cc.latent_dim, cc.codebook_size
    bd.add("denoiser.in_proj", linear_flops(t, d, dc.d_model))
    for i in range(dc.td_blocks):
        bd.add(f"denoiser.block{i}", conformer_block_flops(t, dc.d_model, dc.conv_kernel, dc.ff_expansion))
    for g in range(dc.num_groups):
        bd.add(f"denoiser.head{g}", linear_flops(t, dc.d_model, c))

    # embedding refiner
    bd.add("refiner.in_proj", linear_flops(t, 2 * d, dc.d_model))
    for i in range(dc.er_blocks):
        bd.add(f"refiner.block{i}", conformer_block_flops(t, dc.d_model, dc.conv_kernel, dc.ff_expansion))
    bd.add("refiner.out_proj", linear_flops(t, dc.d_model, d))

    # decoder: stem, transposed blocks, head
    widths = [cc.stem_channels] + list(cc.channels[:-1])
    l = t
    bd.add("codec.decoder.stem", conv_flops(l, 3, cc.latent_dim, cc.channels[-1]))
    ch = cc.channels[-1]
    for i, (stride, width) in enumerate(zip(reversed(cc.strides), reversed(widths))):
        bd.add(f"codec.decoder.block{i}", conv_transpose_flops(l, 2 * stride, ch, width))
        l *= stride
        ch = width
    bd.add("codec.decoder.head", conv_flops(l, 7, ch, 1))
    return bd
