"""Token denoiser and embedding refiner models.

Both are Conformer stacks over latent frames. The token denoiser maps the
summed noisy embedding (all K groups) to per-frame distributions over the
first num_groups clean tokens; the refiner maps those enhanced tokens plus
the noisy embedding back to the full-K summed clean embedding that feeds
the codec decoder. Codebook lookups are hard table reads, so the refiner is
trained with teacher forcing rather than gradients through token choices.
"""

from __future__ import annotations

import numpy as np

from ..codec.config import CodecConfig
from ..codec.quantizer import Codebooks, lookup_sum
from ..codec.tokens import TokenMatrix
from ..errors import DegenerateInputError, DimensionError
from ..nn import ConformerStack, Linear, Module, ModuleList, Tensor, no_grad, stack
from ..nn.checkpoint import load_records, save_records
from .config import DenoiserConfig


class TokenDenoiser(Module):
    """Summed noisy embedding (B, T, D) -> clean-token logits (B, T, g, C)."""

    def __init__(self, config: DenoiserConfig, codec_config: CodecConfig, rng: np.random.Generator):
        self.in_proj = Linear(codec_config.latent_dim, config.d_model, rng)
        self.stack = ConformerStack(
            config.td_blocks, config.d_model, config.num_heads, config.conv_kernel, config.ff_expansion, rng
        )
        self.heads = ModuleList(
            Linear(config.d_model, codec_config.codebook_size, rng) for _ in range(config.num_groups)
        )

    def forward(self, emb: Tensor) -> Tensor:
        if emb.ndim != 3:
            raise DimensionError(f"denoiser input must be (B, T, D), got {emb.shape}")
        y = self.stack(self.in_proj(emb))
        return stack([head(y) for head in self.heads], axis=2)


class EmbeddingRefiner(Module):
    """[enhanced-group sum | noisy full sum] (B, T, 2D) -> summed clean embedding (B, T, D)."""

    def __init__(self, config: DenoiserConfig, codec_config: CodecConfig, rng: np.random.Generator):
        d = codec_config.latent_dim
        self.in_proj = Linear(2 * d, config.d_model, rng)
        self.stack = ConformerStack(
            config.er_blocks, config.d_model, config.num_heads, config.conv_kernel, config.ff_expansion, rng
        )
        self.out_proj = Linear(config.d_model, d, rng)

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 3:
            raise DimensionError(f"refiner input must be (B, T, 2D), got {x.shape}")
        return self.out_proj(self.stack(self.in_proj(x)))


class DenoiserModel(Module):
    """Bundle of both sequence models plus the frozen codebooks they read.

    The codebooks are plain arrays (not parameters), so optimizers built
    from parameters() can never touch them.
    """

    def __init__(
        self,
        config: DenoiserConfig,
        codec_config: CodecConfig,
        codebooks: Codebooks,
        rng: np.random.Generator,
    ):
        if codebooks.codebook_size != codec_config.codebook_size or codebooks.dim != codec_config.latent_dim:
            raise DimensionError("codebooks do not match the codec config")
        if config.num_groups > codec_config.num_quantizers:
            raise DimensionError(
                f"cannot predict {config.num_groups} groups with {codec_config.num_quantizers} quantizers"
            )
        self.denoiser = TokenDenoiser(config, codec_config, rng)
        self.refiner = EmbeddingRefiner(config, codec_config, rng)
        self.config = config
        self.codec_config = codec_config
        self.codebooks = codebooks

    # -- persistence -----------------------------------------------------------

    def save(self, path) -> None:
        records = dict(self.state_dict())
        records.update(self.codebooks.state())
        records["config.scalars"] = np.array(
            [
                self.config.d_model,
                self.config.td_blocks,
                self.config.er_blocks,
                self.config.num_heads,
                self.config.conv_kernel,
                self.config.ff_expansion,
                self.config.num_groups,
            ],
            dtype=np.float64,
        )
        records["codec.strides"] = np.array(self.codec_config.strides, dtype=np.float64)
        records["codec.channels"] = np.array(self.codec_config.channels, dtype=np.float64)
        records["codec.scalars"] = np.array(
            [
                self.codec_config.stem_channels,
                self.codec_config.num_quantizers,
                self.codec_config.codebook_size,
                self.codec_config.latent_dim,
            ],
            dtype=np.float64,
        )
        save_records(path, records)

    @classmethod
    def load(cls, path) -> "DenoiserModel":
        records = load_records(path)
        dm, td, er, heads, kernel, exp, groups = (int(v) for v in records["config.scalars"])
        config = DenoiserConfig(
            d_model=dm,
            td_blocks=td,
            er_blocks=er,
            num_heads=heads,
            conv_kernel=kernel,
            ff_expansion=exp,
            num_groups=groups,
        )
        stem, k, c, d = (int(v) for v in records["codec.scalars"])
        codec_config = CodecConfig(
            strides=tuple(int(v) for v in records["codec.strides"]),
            channels=tuple(int(v) for v in records["codec.channels"]),
            stem_channels=stem,
            num_quantizers=k,
            codebook_size=c,
            latent_dim=d,
        )
        codebooks = Codebooks(records["codebooks.vectors"])
        codebooks.load_state({n: records[n] for n in codebooks.state()})
        model = cls(config, codec_config, codebooks, np.random.default_rng(0))
        model.load_state_dict({n: records[n] for n, _ in model.named_parameters()})
        return model


def denoise_tokens(noisy_tokens: TokenMatrix, model: DenoiserModel) -> tuple:
    """All-K noisy tokens (T, K) -> (probabilities (T, g, C), argmax tokens (T, g)).

    Ties in the argmax resolve to the lowest code index. Inference only: no
    graph is recorded.
    """
    cfg = model.codec_config
    if noisy_tokens.num_frames == 0:
        raise DegenerateInputError("cannot denoise an empty token matrix")
    if noisy_tokens.num_groups != cfg.num_quantizers:
        raise DimensionError(
            f"denoiser expects all {cfg.num_quantizers} token groups, got {noisy_tokens.num_groups}"
        )
    emb = lookup_sum(noisy_tokens, model.codebooks)
    with no_grad():
        logits = model.denoiser(Tensor(emb[None])).data[0]  # (T, g, C)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    weights = np.exp(shifted)
    probs = weights / weights.sum(axis=-1, keepdims=True)
    tokens = np.argmax(logits, axis=-1)
    return probs, TokenMatrix(tokens, cfg.codebook_size)


def refine(
    enhanced_tokens: TokenMatrix,
    noisy_tokens: TokenMatrix,
    refiner: EmbeddingRefiner,
    codebooks: Codebooks,
) -> Tensor:
    """Predict the summed clean embedding (T, D) from token matrices.

    Input is the concatenation [sum of the enhanced groups | sum of all
    noisy groups], in that order.
    """
    if enhanced_tokens.num_frames != noisy_tokens.num_frames:
        raise DimensionError(
            f"frame counts differ: {enhanced_tokens.num_frames} enhanced vs {noisy_tokens.num_frames} noisy"
        )
    head = lookup_sum(enhanced_tokens, codebooks)
    tail = lookup_sum(noisy_tokens, codebooks)
    x = Tensor(np.concatenate([head, tail], axis=-1)[None])
    return refiner(x)[0]
