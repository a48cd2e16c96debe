"""Token matrices and the ATOK interchange file format.

ATOK layout (little-endian): magic b"ATOK", version u32, T u32, k u32,
C u32, then T*k u16 tokens in frame-major order (frame t's k stage tokens
are contiguous).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import CorruptionError, DimensionError, FormatError

MAGIC = b"ATOK"
VERSION = 1


@dataclass
class TokenMatrix:
    """T x k integer tokens, each in [0, num_codes)."""

    tokens: np.ndarray
    num_codes: int

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens)
        if self.tokens.ndim != 2:
            raise DimensionError(f"token matrix must be 2-d (T, k), got shape {self.tokens.shape}")
        if not np.issubdtype(self.tokens.dtype, np.integer):
            raise DimensionError(f"tokens must be integers, got dtype {self.tokens.dtype}")
        self.tokens = self.tokens.astype(np.int64)
        if self.tokens.size and (self.tokens.min() < 0 or self.tokens.max() >= self.num_codes):
            raise CorruptionError(f"token outside [0, {self.num_codes})")

    @property
    def num_frames(self) -> int:
        return self.tokens.shape[0]

    @property
    def num_groups(self) -> int:
        return self.tokens.shape[1]


def write_tokens(tm: TokenMatrix, path) -> None:
    t, k = tm.tokens.shape
    with open(Path(path), "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIII", VERSION, t, k, tm.num_codes))
        fh.write(tm.tokens.astype("<u2").tobytes())


def read_tokens(path) -> TokenMatrix:
    path = Path(path)
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}, expected {MAGIC!r}")
    if len(blob) < 20:
        raise FormatError(f"{path}: header truncated")
    version, t, k, c = struct.unpack_from("<IIII", blob, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported token file version {version}")
    expected = 20 + 2 * t * k
    if len(blob) != expected:
        raise FormatError(f"{path}: payload is {len(blob) - 20} bytes, expected {2 * t * k}")
    tokens = np.frombuffer(blob, dtype="<u2", count=t * k, offset=20).reshape(t, k)
    try:
        return TokenMatrix(tokens.astype(np.int64), num_codes=c)
    except CorruptionError as exc:
        raise CorruptionError(f"{path}: {exc}") from exc
