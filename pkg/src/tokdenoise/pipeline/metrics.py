"""Waveform and token quality metrics.

SI-SNR is the primary quality proxy; log-spectral distance adds a spectral
view and token accuracy measures the denoiser directly. All take plain
arrays or AudioClips and return floats.
"""

from __future__ import annotations

import numpy as np

from ..audio.clip import SAMPLE_RATE, AudioClip
from ..codec.tokens import TokenMatrix
from ..errors import DegenerateInputError, DimensionError

SI_SNR_CAP_DB = 60.0
LSD_FRAME = 512
LSD_HOP = 128
_LSD_EPS = 1e-10


def _samples(x) -> np.ndarray:
    return x.samples if isinstance(x, AudioClip) else np.asarray(x, dtype=np.float64)


def si_snr(estimate, reference) -> float:
    """Scale-invariant SNR in dB, clamped to +-60.

    Both signals are zero-meaned; the reference direction defines the
    target subspace, so rescaling the estimate by any positive factor
    leaves the value unchanged.
    """
    est = _samples(estimate)
    ref = _samples(reference)
    if est.shape != ref.shape:
        raise DimensionError(f"length mismatch: {est.shape} vs {ref.shape}")
    est = est - est.mean()
    ref = ref - ref.mean()
    ref_power = ref @ ref
    if ref_power < 1e-16:
        raise DegenerateInputError("si_snr reference is silent")
    s = (est @ ref) / ref_power * ref
    e = est - s
    signal = s @ s
    noise = e @ e
    # A silent estimate has signal == noise == 0; check the floor first so it
    # lands on the negative cap, not the positive one.
    if signal <= noise * 10.0 ** (-SI_SNR_CAP_DB / 10.0):
        return -SI_SNR_CAP_DB
    if noise <= signal * 10.0 ** (-SI_SNR_CAP_DB / 10.0):
        return SI_SNR_CAP_DB
    return float(10.0 * np.log10(signal / noise))


def log_spectral_distance(estimate, reference, frame_length: int = LSD_FRAME, hop: int = LSD_HOP) -> float:
    """RMS distance between log power spectra, in dB, averaged over frames."""
    est = _samples(estimate)
    ref = _samples(reference)
    if est.shape != ref.shape:
        raise DimensionError(f"length mismatch: {est.shape} vs {ref.shape}")
    if est.size < frame_length:
        raise DimensionError(f"signals shorter than one {frame_length}-sample frame")
    window = np.hanning(frame_length)

    def power(x):
        frames = np.lib.stride_tricks.sliding_window_view(x, frame_length)[::hop]
        return np.abs(np.fft.rfft(frames * window, axis=-1)) ** 2

    ratio = 10.0 * np.log10((power(est) + _LSD_EPS) / (power(ref) + _LSD_EPS))
    return float(np.mean(np.sqrt(np.mean(ratio**2, axis=-1))))


def token_accuracy(predicted: TokenMatrix, truth: TokenMatrix) -> np.ndarray:
    """Fraction of matching tokens per group; shape (num_groups,)."""
    if predicted.tokens.shape != truth.tokens.shape:
        raise DimensionError(
            f"token shapes differ: {predicted.tokens.shape} vs {truth.tokens.shape}"
        )
    return (predicted.tokens == truth.tokens).mean(axis=0)


__all__ = [
    "SAMPLE_RATE",
    "SI_SNR_CAP_DB",
    "log_spectral_distance",
    "si_snr",
    "token_accuracy",
]
