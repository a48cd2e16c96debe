"""Waveform container and PCM16 WAV file I/O.

Everything in the project runs at a fixed 16 kHz mono rate. Conversion
between float64 and PCM16 uses the symmetric scale 32767, so the i16 value
-32768 is never produced and a write/read/write cycle is byte-identical.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DimensionError, FormatError, NumericError

SAMPLE_RATE = 16000
PCM_SCALE = 32767.0


@dataclass
class AudioClip:
    """Mono float64 waveform in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise DimensionError(f"clip must be a 1-d mono waveform, got shape {self.samples.shape}")
        if not np.isfinite(self.samples).all():
            raise NumericError("clip contains non-finite samples")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate

    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.samples**2)))


def write_wav(clip: AudioClip, path) -> None:
    """Write a clip as PCM16 mono WAV, clamping to the representable range."""
    quantized = np.clip(np.rint(clip.samples * PCM_SCALE), -PCM_SCALE, PCM_SCALE).astype("<i2")
    path = Path(path)
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(clip.sample_rate)
        fh.writeframes(quantized.tobytes())


def read_wav(path) -> AudioClip:
    """Read a PCM16 mono 16 kHz WAV file; anything else is a format error."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as fh:
            channels = fh.getnchannels()
            width = fh.getsampwidth()
            rate = fh.getframerate()
            frames = fh.readframes(fh.getnframes())
    except FileNotFoundError:
        raise
    except (wave.Error, EOFError) as exc:
        raise FormatError(f"{path}: not a readable WAV file ({exc})") from exc
    if channels != 1:
        raise FormatError(f"{path}: channels is {channels}, expected 1 (mono)")
    if width != 2:
        raise FormatError(f"{path}: bit depth is {8 * width}, expected 16")
    if rate != SAMPLE_RATE:
        raise FormatError(f"{path}: sample rate is {rate}, expected {SAMPLE_RATE}")
    data = np.frombuffer(frames, dtype="<i2").astype(np.float64) / PCM_SCALE
    return AudioClip(data)
