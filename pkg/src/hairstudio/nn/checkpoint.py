"""Versioned flat binary checkpoint container.

Layout (all little-endian):

    magic "HSCK" | version u32 | sha256(meta json) 32 bytes |
    meta_len u32 | meta json utf-8 |
    blob_count u32 | blobs...

    blob: name_len u16 | name utf-8 | dtype u8 | ndim u8 | dims u32*ndim | data

Meta is a JSON object carrying the run config, phase, and anything else
the pipeline wants to pin; its digest doubles as the config digest that
phase gating and preview caching key on.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

__all__ = ["save_checkpoint", "load_checkpoint", "peek_digest", "meta_digest"]

MAGIC = b"HSCK"
VERSION = 1

_DTYPES = {0: "<f4", 1: "<f8", 2: "<i8"}
_DTYPE_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1, np.dtype("int64"): 2}


def meta_digest(meta: dict) -> str:
    return hashlib.sha256(json.dumps(meta, sort_keys=True).encode()).hexdigest()


def save_checkpoint(path, meta: dict, blobs: dict[str, np.ndarray]):
    meta_bytes = json.dumps(meta, sort_keys=True).encode()
    digest = hashlib.sha256(meta_bytes).digest()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(digest)
        f.write(struct.pack("<I", len(meta_bytes)))
        f.write(meta_bytes)
        f.write(struct.pack("<I", len(blobs)))
        for name in sorted(blobs):
            arr = np.asarray(blobs[name])
            if arr.dtype not in _DTYPE_CODES:
                arr = arr.astype(np.float32)
            code = _DTYPE_CODES[arr.dtype]
            name_b = name.encode()
            f.write(struct.pack("<H", len(name_b)))
            f.write(name_b)
            f.write(struct.pack("<BB", code, arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())


def load_checkpoint(path):
    """Returns (meta, digest-hex, blobs)."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != MAGIC:
        raise ValueError("not a checkpoint file")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    digest = blob[8:40]
    (meta_len,) = struct.unpack_from("<I", blob, 40)
    off = 44
    meta_bytes = blob[off : off + meta_len]
    if hashlib.sha256(meta_bytes).digest() != digest:
        raise ValueError("checkpoint meta digest mismatch")
    meta = json.loads(meta_bytes)
    off += meta_len
    (count,) = struct.unpack_from("<I", blob, off)
    off += 4
    blobs: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, off)
        off += 2
        name = blob[off : off + name_len].decode()
        off += name_len
        code, ndim = struct.unpack_from("<BB", blob, off)
        off += 2
        shape = struct.unpack_from(f"<{ndim}I", blob, off)
        off += 4 * ndim
        dtype = np.dtype(_DTYPES[code])
        n_bytes = int(np.prod(shape)) * dtype.itemsize if ndim else dtype.itemsize
        arr = np.frombuffer(blob, dtype=dtype, count=max(1, int(np.prod(shape))), offset=off)
        off += n_bytes
        blobs[name] = arr.reshape(shape).copy()
    return meta, digest.hex(), blobs


def peek_digest(path) -> str:
    with open(path, "rb") as f:
        head = f.read(40)
    if head[:4] != MAGIC:
        raise ValueError("not a checkpoint file")
    return head[8:40].hex()
