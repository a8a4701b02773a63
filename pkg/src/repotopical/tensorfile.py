"""Versioned binary container for named tensors.

Layout: magic "TPCL", u32 version, length-prefixed UTF-8 config JSON, u32
tensor count, then per tensor: u16 name length + name, u8 dtype code, u8
ndim, u64 dims, raw row-major payload. Everything little-endian; files
round-trip bit-exactly.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import ValidationError

MAGIC = b"TPCL"
VERSION = 1

_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1}


def write_tensor_file(path, config: dict, tensors: dict[str, np.ndarray]) -> None:
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", VERSION)
    config_bytes = json.dumps(config, sort_keys=True).encode("utf-8")
    blob += struct.pack("<I", len(config_bytes))
    blob += config_bytes
    blob += struct.pack("<I", len(tensors))
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name])
        if arr.dtype not in _DTYPE_CODES:
            raise ValidationError(f"unsupported dtype {arr.dtype} for tensor {name!r}")
        name_bytes = name.encode("utf-8")
        blob += struct.pack("<H", len(name_bytes))
        blob += name_bytes
        blob += struct.pack("<BB", _DTYPE_CODES[arr.dtype], arr.ndim)
        blob += struct.pack(f"<{arr.ndim}Q", *arr.shape)
        blob += arr.astype(arr.dtype.newbyteorder("<")).tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(blob)


def read_tensor_file(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        data = fh.read()
    view = memoryview(data)
    offset = 0

    def take(n: int) -> memoryview:
        nonlocal offset
        if offset + n > len(view):
            raise ValidationError(f"{path}: truncated tensor file")
        chunk = view[offset : offset + n]
        offset += n
        return chunk

    if bytes(take(4)) != MAGIC:
        raise ValidationError(f"{path}: bad magic, not a tensor file")
    (version,) = struct.unpack("<I", take(4))
    if version != VERSION:
        raise ValidationError(f"{path}: unsupported version {version}")
    (config_len,) = struct.unpack("<I", take(4))
    config = json.loads(bytes(take(config_len)).decode("utf-8"))
    (count,) = struct.unpack("<I", take(4))
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = bytes(take(name_len)).decode("utf-8")
        code, ndim = struct.unpack("<BB", take(2))
        if code not in _DTYPES:
            raise ValidationError(f"{path}: unknown dtype code {code}")
        shape = struct.unpack(f"<{ndim}Q", take(8 * ndim))
        dtype = _DTYPES[code]
        nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize if ndim else dtype.itemsize
        arr = np.frombuffer(take(nbytes), dtype=dtype).reshape(shape)
        tensors[name] = arr.copy()
    return config, tensors
