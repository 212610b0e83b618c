"""Binary checkpoint container: named float32 blocks, bit-exact round trip.

Layout (little-endian): magic ``OJSC``, u32 format version, u32 block
count, then per block u32 name length, UTF-8 name, u32 rank, u32 extents,
and the raw IEEE-754 float32 values in row-major order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

__all__ = ["save_blocks", "load_blocks", "MAGIC", "VERSION"]

MAGIC = b"OJSC"
VERSION = 1


def save_blocks(path, blocks: dict[str, np.ndarray]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(blocks)))
        for name, arr in blocks.items():
            arr = np.asarray(arr)
            if arr.dtype != np.float32:
                raise ValueError(
                    f"checkpoint block '{name}' must be float32, got {arr.dtype}")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_blocks(path) -> dict[str, np.ndarray]:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    offset = 12
    blocks: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<I", data, offset)
        offset += 4
        name = data[offset:offset + name_len].decode("utf-8")
        offset += name_len
        (rank,) = struct.unpack_from("<I", data, offset)
        offset += 4
        shape = struct.unpack_from(f"<{rank}I", data, offset)
        offset += 4 * rank
        n = int(np.prod(shape)) if rank else 1
        arr = np.frombuffer(data, dtype="<f4", count=n, offset=offset)
        offset += 4 * n
        blocks[name] = arr.reshape(shape).astype(np.float32)
    return blocks
