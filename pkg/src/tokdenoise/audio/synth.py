"""Deterministic synthetic speech-like signals and noise beds.

The clean generator produces a harmonic series with a slowly wandering
fundamental and a syllable-like on/off envelope; it is a corpus stand-in,
not a vocoder. Every function is a pure function of (seed, arguments).
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .clip import SAMPLE_RATE, AudioClip

NOISE_KINDS = ("white", "pink", "babble")
CLEAN_PEAK = 0.7
NOISE_RMS = 0.1
MIN_DURATION_S = 0.5
_BABBLE_STREAMS = 6


def _syllable_envelope(rng: np.random.Generator, n: int) -> np.ndarray:
    """Alternating voiced/pause gain profile, smoothed to avoid clicks."""
    env = np.zeros(n)
    pos = 0
    voiced = True  # start voiced so the clip is never silent
    while pos < n:
        dur_s = rng.uniform(0.15, 0.40) if voiced else rng.uniform(0.05, 0.15)
        seg = min(n - pos, int(round(dur_s * SAMPLE_RATE)))
        if voiced:
            env[pos : pos + seg] = rng.uniform(0.6, 1.0)
        pos += seg
        voiced = not voiced
    smoother = np.hanning(int(0.02 * SAMPLE_RATE))
    smoother /= smoother.sum()
    return np.convolve(env, smoother, mode="same")


def gen_clean(seed: int, duration_s: float, constant_pitch_hz: float | None = None) -> AudioClip:
    """Speech-like harmonic clip, peak-normalized to 0.7.

    The fundamental is drawn in [90, 300] Hz with a +-3 % sub-2 Hz wobble and
    4-8 harmonics with decaying amplitudes. Passing constant_pitch_hz pins
    the pitch and drops the envelope, giving a stationary tone whose spectral
    peak sits exactly at the fundamental (used by spectrum oracles).
    """
    if duration_s < MIN_DURATION_S:
        raise ConfigError(f"clip duration must be >= {MIN_DURATION_S} s, got {duration_s}")
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * SAMPLE_RATE))
    times = np.arange(n) / SAMPLE_RATE

    f0 = rng.uniform(90.0, 300.0)
    n_harmonics = int(rng.integers(4, 9))
    decay = rng.uniform(0.8, 1.5)
    amps = 1.0 / (1.0 + np.arange(n_harmonics)) ** decay
    harm_phases = rng.uniform(0.0, 2.0 * np.pi, size=n_harmonics)
    wobble_freqs = rng.uniform(0.4, 2.0, size=2)
    wobble_phases = rng.uniform(0.0, 2.0 * np.pi, size=2)

    if constant_pitch_hz is not None:
        inst_freq = np.full(n, float(constant_pitch_hz))
    else:
        wobble = sum(np.sin(2 * np.pi * f * times + p) for f, p in zip(wobble_freqs, wobble_phases))
        inst_freq = f0 * (1.0 + 0.015 * wobble)
    phase = 2.0 * np.pi * np.cumsum(inst_freq) / SAMPLE_RATE

    x = np.zeros(n)
    for k in range(n_harmonics):
        x += amps[k] * np.sin((k + 1) * phase + harm_phases[k])
    if constant_pitch_hz is None:
        x *= _syllable_envelope(rng, n)

    x *= CLEAN_PEAK / np.abs(x).max()
    return AudioClip(x)


def gen_noise(seed: int, duration_s: float, kind: str = "white") -> AudioClip:
    """Noise bed of the given kind, RMS-normalized to 0.1.

    white: flat spectrum. pink: 1/f power rolloff. babble: sum of six
    independent clean streams, the classic multi-talker proxy.
    """
    if duration_s < MIN_DURATION_S:
        raise ConfigError(f"clip duration must be >= {MIN_DURATION_S} s, got {duration_s}")
    if kind not in NOISE_KINDS:
        raise ConfigError(f"unknown noise kind {kind!r}, expected one of {NOISE_KINDS}")
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * SAMPLE_RATE))

    if kind == "white":
        x = rng.standard_normal(n)
    elif kind == "pink":
        spec = np.fft.rfft(rng.standard_normal(n))
        freqs = np.fft.rfftfreq(n, 1.0 / SAMPLE_RATE)
        weight = np.zeros_like(freqs)
        weight[1:] = 1.0 / np.sqrt(freqs[1:])  # 1/f in power
        x = np.fft.irfft(spec * weight, n=n)
    else:
        stream_seeds = rng.integers(0, 2**63 - 1, size=_BABBLE_STREAMS)
        x = np.zeros(n)
        for s in stream_seeds:
            x += gen_clean(int(s), duration_s).samples

    x *= NOISE_RMS / np.sqrt(np.mean(x**2))
    return AudioClip(x)
