"""Binary parameter checkpoints.

Layout (all integers little-endian)::

    b"DVD1" | count:u32 | { name_len:u16 | name:utf8 | rank:u8 | dims:u32*rank | data:f64*prod(dims) }*
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"DVD1"


class CheckpointError(ValueError):
    pass


def dumps(params: dict) -> bytes:
    chunks = [MAGIC, struct.pack("<I", len(params))]
    for name, value in params.items():
        arr = np.asarray(value, dtype=np.float64)
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF or arr.ndim > 0xFF:
            raise CheckpointError(f"entry {name!r} does not fit the format")
        chunks.append(struct.pack("<H", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr).astype("<f8").tobytes())
    return b"".join(chunks)


def loads(blob: bytes) -> dict[str, np.ndarray]:
    if blob[:4] != MAGIC:
        raise CheckpointError("bad magic, not a DVD1 checkpoint")
    try:
        (count,) = struct.unpack_from("<I", blob, 4)
        pos = 8
        out = {}
        for _ in range(count):
            (n,) = struct.unpack_from("<H", blob, pos)
            pos += 2
            name = blob[pos : pos + n].decode("utf-8")
            pos += n
            (rank,) = struct.unpack_from("<B", blob, pos)
            pos += 1
            dims = struct.unpack_from(f"<{rank}I", blob, pos)
            pos += 4 * rank
            size = int(np.prod(dims, dtype=np.int64))
            data = np.frombuffer(blob, dtype="<f8", count=size, offset=pos)
            pos += 8 * size
            out[name] = data.astype(np.float64).reshape(dims)
    except (struct.error, ValueError) as exc:
        raise CheckpointError(f"truncated or corrupt checkpoint: {exc}") from exc
    if pos != len(blob):
        raise CheckpointError(f"{len(blob) - pos} trailing bytes after last entry")
    return out


def save(path, params: dict) -> None:
    Path(path).write_bytes(dumps(params))


def load(path) -> dict[str, np.ndarray]:
    return loads(Path(path).read_bytes())
