"""Versioned binary container for named float arrays.

Layout (little endian):
    magic     8 bytes  b"SEGTAGCK"
    version   u32
    precision u8       bytes per value (4 or 8)
    step      u64
    count     u32      number of entries
    entry*    name_len u16, name utf-8, ndim u8, dims u32*, raw values

Round trips are bit exact.  A reader either returns the complete content
or raises; nothing partial escapes.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"SEGTAGCK"
VERSION = 1


def save_arrays(path, arrays: dict[str, np.ndarray], step: int, precision: int) -> None:
    if precision not in (4, 8):
        raise ValueError(f"precision must be 4 or 8 bytes, got {precision}")
    dtype = np.float32 if precision == 4 else np.float64
    chunks = [MAGIC, struct.pack("<IBQI", VERSION, precision, step, len(arrays))]
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr, dtype=dtype)
        raw_name = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw_name)))
        chunks.append(raw_name)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_arrays(path) -> tuple[dict[str, np.ndarray], int, int]:
    """Return (arrays, step, precision); raise ValueError on any defect."""
    blob = Path(path).read_bytes()
    try:
        if blob[:8] != MAGIC:
            raise ValueError(f"bad magic in {path}: not a checkpoint file")
        version, precision, step, count = struct.unpack_from("<IBQI", blob, 8)
        if version != VERSION:
            raise ValueError(f"unsupported checkpoint version {version} in {path}")
        if precision not in (4, 8):
            raise ValueError(f"invalid precision {precision} in {path}")
        dtype = np.float32 if precision == 4 else np.float64
        pos = 8 + struct.calcsize("<IBQI")
        arrays: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", blob, pos)
            pos += 2
            name = blob[pos : pos + name_len].decode("utf-8")
            pos += name_len
            (ndim,) = struct.unpack_from("<B", blob, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}I", blob, pos)
            pos += 4 * ndim
            n_bytes = int(np.prod(shape, dtype=np.int64)) * precision if ndim else precision
            if pos + n_bytes > len(blob):
                raise ValueError(f"truncated checkpoint {path}")
            arrays[name] = np.frombuffer(blob[pos : pos + n_bytes], dtype=dtype).reshape(shape).copy()
            pos += n_bytes
        if pos != len(blob):
            raise ValueError(f"trailing bytes in checkpoint {path}")
    except (struct.error, UnicodeDecodeError) as exc:
        raise ValueError(f"corrupt checkpoint {path}: {exc}") from exc
    return arrays, int(step), int(precision)
