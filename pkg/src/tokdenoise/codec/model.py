"""Convolutional codec: strided encoder, mirror decoder, RVQ in between.

The encoder maps (B, 1, L) waveforms to (B, T, D) latent frames with
T = L / downsample_rate (inputs are right-zero-padded to a multiple of the
rate first). The decoder mirrors the strides with transposed convolutions
and ends in tanh, so outputs always sit inside (-1, 1).
"""

from __future__ import annotations

import numpy as np

from ..audio import AudioClip
from ..errors import DegenerateInputError, DimensionError
from ..nn import Conv1d, ConvTranspose1d, Module, ModuleList, Tensor, no_grad
from ..nn.checkpoint import load_records, save_records
from .config import CodecConfig
from .quantizer import Codebooks, lookup_sum, rvq_quantize
from .tokens import TokenMatrix


class Encoder(Module):
    def __init__(self, config: CodecConfig, rng: np.random.Generator):
        self.stem = Conv1d(1, config.stem_channels, kernel_size=7, rng=rng, padding=3)
        blocks = []
        ch = config.stem_channels
        for stride, width in zip(config.strides, config.channels):
            # kernel 2*stride / padding stride//2 keeps L_out = L_in / stride
            blocks.append(Conv1d(ch, width, kernel_size=2 * stride, rng=rng, stride=stride, padding=stride // 2))
            ch = width
        self.blocks = ModuleList(blocks)
        self.proj = Conv1d(ch, config.latent_dim, kernel_size=3, rng=rng, padding=1)

    def forward(self, x: Tensor) -> Tensor:
        h = self.stem(x)
        for block in self.blocks:
            h = block(h.swish())
        return self.proj(h.swish())  # (B, D, T)


class Decoder(Module):
    def __init__(self, config: CodecConfig, rng: np.random.Generator):
        widths = list(config.channels)
        self.stem = Conv1d(config.latent_dim, widths[-1], kernel_size=3, rng=rng, padding=1)
        blocks = []
        ch = widths[-1]
        for stride, width in zip(reversed(config.strides), reversed([config.stem_channels] + widths[:-1])):
            blocks.append(
                ConvTranspose1d(ch, width, kernel_size=2 * stride, rng=rng, stride=stride, padding=stride // 2)
            )
            ch = width
        self.blocks = ModuleList(blocks)
        self.head = Conv1d(ch, 1, kernel_size=7, rng=rng, padding=3)

    def forward(self, z: Tensor) -> Tensor:
        h = self.stem(z)
        for block in self.blocks:
            h = block(h.swish())
        return self.head(h.swish()).tanh()  # (B, 1, L)


class CodecModel(Module):
    """Encoder + codebooks + decoder with clip-level convenience methods."""

    def __init__(self, config: CodecConfig, rng: np.random.Generator):
        self.encoder = Encoder(config, rng)
        self.decoder = Decoder(config, rng)
        self.config = config
        self.codebooks = Codebooks.random(config, rng)

    # -- batched tensor paths (training) --------------------------------------

    def encode_batch(self, x: Tensor) -> Tensor:
        """(B, 1, L) waveforms -> (B, T, D) latents; L must divide evenly."""
        if x.ndim != 3 or x.shape[1] != 1:
            raise DimensionError(f"encoder input must be (B, 1, L), got {x.shape}")
        if x.shape[-1] % self.config.downsample_rate != 0:
            raise DimensionError(f"length {x.shape[-1]} not a multiple of {self.config.downsample_rate}")
        return self.encoder(x).swapaxes(1, 2)

    def decode_batch(self, latents: Tensor) -> Tensor:
        """(B, T, D) latents -> (B, 1, T*M) waveforms."""
        return self.decoder(latents.swapaxes(1, 2))

    # -- clip paths (inference; no autodiff graph) -----------------------------

    def pad_samples(self, samples: np.ndarray) -> np.ndarray:
        m = self.config.downsample_rate
        remainder = samples.size % m
        if remainder:
            samples = np.concatenate([samples, np.zeros(m - remainder)])
        return samples

    def encode(self, clip: AudioClip) -> np.ndarray:
        """Clip -> (T, D) latent frames, T = ceil(L / M)."""
        if len(clip) == 0:
            raise DegenerateInputError("cannot encode an empty clip")
        padded = self.pad_samples(clip.samples)
        with no_grad():
            latents = self.encode_batch(Tensor(padded[None, None, :]))
        return latents.data[0]

    def tokenize(self, clip: AudioClip, k: int | None = None) -> TokenMatrix:
        """Clip -> T x k acoustic tokens through the full encode+RVQ path."""
        k = self.config.num_quantizers if k is None else k
        tm, _, _ = rvq_quantize(self.encode(clip), self.codebooks, k)
        return tm

    def decode(self, summed_embedding: np.ndarray, length: int | None = None) -> AudioClip:
        """(T, D) summed code vectors (or raw latents) -> waveform clip."""
        summed_embedding = np.asarray(summed_embedding, dtype=np.float64)
        if summed_embedding.ndim != 2 or summed_embedding.shape[1] != self.config.latent_dim:
            raise DimensionError(f"decoder input must be (T, {self.config.latent_dim}), got {summed_embedding.shape}")
        with no_grad():
            wave = self.decode_batch(Tensor(summed_embedding[None, :, :]))
        samples = wave.data[0, 0]
        if length is not None:
            samples = samples[:length]
        return AudioClip(samples)

    def reconstruct(self, clip: AudioClip, k: int | None = None) -> AudioClip:
        """Full quantized round trip at k stages, trimmed to the clip length."""
        k = self.config.num_quantizers if k is None else k
        tm = self.tokenize(clip, k)
        summed = lookup_sum(tm, self.codebooks, 1, k)
        return self.decode(summed, length=len(clip))

    # -- persistence -----------------------------------------------------------

    def save(self, path) -> None:
        records = dict(self.state_dict())
        records.update(self.codebooks.state())
        records["config.strides"] = np.array(self.config.strides, dtype=np.float64)
        records["config.channels"] = np.array(self.config.channels, dtype=np.float64)
        records["config.scalars"] = np.array(
            [
                self.config.stem_channels,
                self.config.num_quantizers,
                self.config.codebook_size,
                self.config.latent_dim,
            ],
            dtype=np.float64,
        )
        save_records(path, records)

    @classmethod
    def load(cls, path) -> "CodecModel":
        records = load_records(path)
        stem, k, c, d = (int(v) for v in records["config.scalars"])
        config = CodecConfig(
            strides=tuple(int(v) for v in records["config.strides"]),
            channels=tuple(int(v) for v in records["config.channels"]),
            stem_channels=stem,
            num_quantizers=k,
            codebook_size=c,
            latent_dim=d,
        )
        model = cls(config, np.random.default_rng(0))
        weights = {n: records[n] for n, _ in model.named_parameters()}
        model.load_state_dict(weights)
        model.codebooks.load_state({n: records[n] for n in model.codebooks.state()})
        return model
