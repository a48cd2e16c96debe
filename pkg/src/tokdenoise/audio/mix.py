"""Exact-SNR mixing of clean speech with a noise bed."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateInputError
from .clip import AudioClip

SILENCE_RMS = 1e-8


@dataclass
class MixResult:
    """A mixture plus its co-scaled components; noisy = clean + noise holds
    sample-for-sample, so the achieved SNR can be recomputed exactly."""

    noisy: AudioClip
    clean: AudioClip
    noise: AudioClip
    snr_db: float
    rescale: float


def achieved_snr_db(clean: AudioClip, noise: AudioClip) -> float:
    """SNR of a decomposed mixture, 10*log10(P_clean / P_noise)."""
    p_clean = float(np.sum(clean.samples**2))
    p_noise = float(np.sum(noise.samples**2))
    return 10.0 * np.log10(p_clean / p_noise)


def mix_at_snr(clean: AudioClip, noise: AudioClip, snr_db: float) -> MixResult:
    """Scale the noise so the mixture hits snr_db exactly.

    The noise is looped (cyclically) or truncated to the clean length first.
    If the raw mixture peaks above 1, mixture and both components are
    rescaled by the same factor, which leaves the SNR untouched.
    """
    c = clean.samples
    n = np.resize(noise.samples, c.size)
    rms_c = float(np.sqrt(np.mean(c**2)))
    rms_n = float(np.sqrt(np.mean(n**2)))
    if rms_c < SILENCE_RMS:
        raise DegenerateInputError(f"clean clip is silent (rms {rms_c:.3e})")
    if rms_n < SILENCE_RMS:
        raise DegenerateInputError(f"noise clip is silent (rms {rms_n:.3e})")

    gain = rms_c / (rms_n * 10.0 ** (snr_db / 20.0))
    scaled_noise = gain * n
    noisy = c + scaled_noise
    peak = float(np.abs(noisy).max())
    factor = 1.0 / peak if peak > 1.0 else 1.0
    return MixResult(
        noisy=AudioClip(noisy * factor),
        clean=AudioClip(c * factor),
        noise=AudioClip(scaled_noise * factor),
        snr_db=float(snr_db),
        rescale=factor,
    )
