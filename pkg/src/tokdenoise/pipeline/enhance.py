"""Single-clip enhancement: noisy waveform in, enhanced waveform out."""

from __future__ import annotations

import numpy as np

from ..audio.clip import AudioClip
from ..codec.model import CodecModel
from ..codec.tokens import TokenMatrix
from ..denoiser.model import DenoiserModel, denoise_tokens, refine
from ..errors import ConfigError
from ..nn import no_grad


def enhance(noisy: AudioClip, codec: CodecModel, model: DenoiserModel) -> tuple:
    """Full path: encode, quantize, denoise tokens, refine embedding, decode.

    Returns (enhanced AudioClip trimmed to the input length, the first
    num_groups enhanced tokens). The token matrix is the acoustic prompt a
    downstream token language model would consume.
    """
    if not np.array_equal(model.codebooks.vectors, codec.codebooks.vectors):
        raise ConfigError("denoiser checkpoint was trained against different codebooks than this codec")
    noisy_tokens = codec.tokenize(noisy)  # (T, K)
    _, enhanced_tokens = denoise_tokens(noisy_tokens, model)
    with no_grad():
        summed = refine(enhanced_tokens, noisy_tokens, model.refiner, model.codebooks)
    clip = codec.decode(summed.data, length=len(noisy))
    return clip, enhanced_tokens


def enhance_tokens_only(noisy_tokens: TokenMatrix, model: DenoiserModel) -> TokenMatrix:
    """Token-domain path for pre-encoded inputs (ATOK files)."""
    _, enhanced_tokens = denoise_tokens(noisy_tokens, model)
    return enhanced_tokens
