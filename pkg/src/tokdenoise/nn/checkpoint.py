"""Binary checkpoint files: named float64 arrays, bit-exact round trip.

Layout (all integers little-endian):

    magic   4 bytes  b"TDNZ"
    version u32      currently 1
    count   u32      number of records
    record  repeated: name_len u32, name bytes (UTF-8),
                      rank u32, dims u64 * rank,
                      data  f64 * prod(dims)
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError

MAGIC = b"TDNZ"
VERSION = 1


def save_records(path, records: dict) -> None:
    """Write a name -> float64 array mapping. Insertion order is preserved."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(records)))
        for name, arr in records.items():
            # asarray, not ascontiguousarray: the latter promotes 0-d to 1-d
            arr = np.asarray(arr, dtype="<f8")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())


def load_records(path) -> dict:
    path = Path(path)
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}, expected {MAGIC!r}")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    records: dict = {}
    offset = 12
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<I", blob, offset)
            offset += 4
            name = blob[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<I", blob, offset)
            offset += 4
            dims = struct.unpack_from(f"<{rank}Q", blob, offset)
            offset += 8 * rank
            n = int(np.prod(dims)) if rank else 1
            data = np.frombuffer(blob, dtype="<f8", count=n, offset=offset).reshape(dims)
            offset += 8 * n
            records[name] = data.astype(np.float64)
    except (struct.error, ValueError) as exc:
        raise FormatError(f"{path}: truncated or corrupt checkpoint ({exc})") from exc
    if offset != len(blob):
        raise FormatError(f"{path}: {len(blob) - offset} trailing bytes after last record")
    return records
