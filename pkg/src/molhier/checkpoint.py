"""Binary container for named float64/int64 arrays.

Layout (all little-endian)::

    magic      8 bytes  b"MOLHIER\\x00"
    version    u32      currently 1
    count      u32      number of sections
    section*   u16 name length, UTF-8 name,
               u8 dtype (1 = float64, 2 = int64), u8 ndim, u32 * ndim shape,
               raw array bytes in C order

Sections are written in the order given, so identical inputs give identical
files.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"MOLHIER\x00"
VERSION = 1
_DTYPES = {1: np.dtype("<f8"), 2: np.dtype("<i8")}
_CODES = {"f": 1, "i": 2}


class CheckpointError(ValueError):
    pass


def dumps(sections: dict[str, np.ndarray]) -> bytes:
    out = [MAGIC, struct.pack("<II", VERSION, len(sections))]
    for name, arr in sections.items():
        arr = np.asarray(arr)
        code = _CODES.get(arr.dtype.kind)
        if code is None:
            raise CheckpointError(f"section {name!r}: unsupported dtype {arr.dtype}")
        raw = name.encode("utf-8")
        out.append(struct.pack("<H", len(raw)) + raw)
        out.append(struct.pack("<BB", code, arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())
    return b"".join(out)


def loads(data: bytes) -> dict[str, np.ndarray]:
    if data[:8] != MAGIC:
        raise CheckpointError("bad magic; not a molhier checkpoint")
    try:
        version, count = struct.unpack_from("<II", data, 8)
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        pos = 16
        sections: dict[str, np.ndarray] = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", data, pos)
            pos += 2
            name = data[pos : pos + nlen].decode("utf-8")
            pos += nlen
            code, ndim = struct.unpack_from("<BB", data, pos)
            pos += 2
            shape = struct.unpack_from(f"<{ndim}I", data, pos)
            pos += 4 * ndim
            dtype = _DTYPES[code]
            size = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
            if pos + size > len(data):
                raise CheckpointError(f"section {name!r} truncated")
            sections[name] = np.frombuffer(data, dtype=dtype, count=size // dtype.itemsize, offset=pos).reshape(shape).astype(dtype.newbyteorder("="))
            pos += size
    except (struct.error, KeyError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint: {exc}") from exc
    if pos != len(data):
        raise CheckpointError(f"{len(data) - pos} trailing bytes")
    return sections


def save(path: str | Path, sections: dict[str, np.ndarray]) -> None:
    Path(path).write_bytes(dumps(sections))


def load(path: str | Path) -> dict[str, np.ndarray]:
    return loads(Path(path).read_bytes())
