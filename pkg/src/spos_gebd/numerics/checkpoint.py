"""Binary checkpoint format.

Layout (all integers little-endian u32)::

    b"SPOSCKPT" | version=1 | count
    per parameter: name_len | name (utf-8) | rank | extents... | values (f32 LE)
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Mapping

import numpy as np

MAGIC = b"SPOSCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def encode(params: Mapping[str, np.ndarray]) -> bytes:
    chunks = [MAGIC, struct.pack("<II", VERSION, len(params))]
    for name, values in params.items():
        arr = np.asarray(values)
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(chunks)


def decode(blob: bytes, source: str = "<bytes>") -> dict[str, np.ndarray]:
    if blob[:8] != MAGIC:
        raise CheckpointError(f"{source}: bad magic {blob[:8]!r}")
    pos = 8

    def take(fmt: str):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(blob):
            raise CheckpointError(f"{source}: truncated at byte {pos}")
        vals = struct.unpack_from(fmt, blob, pos)
        pos += size
        return vals

    version, count = take("<II")
    if version != VERSION:
        raise CheckpointError(f"{source}: unsupported version {version}")
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = take("<I")
        name = blob[pos : pos + name_len].decode("utf-8")
        pos += name_len
        (rank,) = take("<I")
        shape = take(f"<{rank}I") if rank else ()
        n = int(np.prod(shape, dtype=np.int64))
        if pos + 4 * n > len(blob):
            raise CheckpointError(f"{source}: truncated values for {name!r}")
        out[name] = np.frombuffer(blob, dtype="<f4", count=n, offset=pos).reshape(shape).copy()
        pos += 4 * n
    if pos != len(blob):
        raise CheckpointError(f"{source}: {len(blob) - pos} trailing bytes")
    return out


def save(path, params: Mapping[str, np.ndarray]) -> None:
    path = Path(path)
    try:
        path.write_bytes(encode(params))
    except OSError as exc:
        raise OSError(f"cannot write checkpoint {path}: {exc.strerror}") from exc


def load(path) -> dict[str, np.ndarray]:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read checkpoint {path}: {exc.strerror}") from exc
    return decode(blob, str(path))
