"""Flat binary tensor files: 32-byte header, then row-major little-endian data.

Header layout (little-endian): 4-byte magic ``TMAS``, uint16 dtype tag,
uint16 version, uint64 rows, uint64 cols, 8 reserved bytes. Supported
payloads are uint8 (quantized codes), float32 (scales) and uint16
(bfloat16 output bit patterns).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import InvalidInput

MAGIC = b"TMAS"
VERSION = 1
_HEADER = struct.Struct("<4sHHQQ8x")

_TAG_FOR_DTYPE = {
    np.dtype("uint8"): 0,
    np.dtype("<f4"): 1,
    np.dtype("<u2"): 2,
}
_DTYPE_FOR_TAG = {v: k for k, v in _TAG_FOR_DTYPE.items()}


def write_tensor(path, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr)
    if arr.ndim != 2:
        raise InvalidInput(f"only 2-D tensors are serialized, got ndim={arr.ndim}")
    dt = arr.dtype.newbyteorder("<")
    if dt not in _TAG_FOR_DTYPE:
        raise InvalidInput(f"unsupported dtype {arr.dtype}")
    header = _HEADER.pack(MAGIC, _TAG_FOR_DTYPE[dt], VERSION, arr.shape[0], arr.shape[1])
    with open(path, "wb") as f:
        f.write(header)
        f.write(arr.astype(dt, copy=False).tobytes())


def read_tensor(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise InvalidInput(f"{path}: truncated header")
    magic, tag, version, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise InvalidInput(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise InvalidInput(f"{path}: unsupported version {version}")
    if tag not in _DTYPE_FOR_TAG:
        raise InvalidInput(f"{path}: unknown dtype tag {tag}")
    dt = _DTYPE_FOR_TAG[tag]
    need = rows * cols * dt.itemsize
    body = raw[_HEADER.size :]
    if len(body) != need:
        raise InvalidInput(f"{path}: payload is {len(body)} bytes, expected {need}")
    return np.frombuffer(body, dtype=dt).reshape(rows, cols).copy()
