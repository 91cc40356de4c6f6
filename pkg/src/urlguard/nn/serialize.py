"""Versioned, checksummed binary model file.

    "URLB" | u16 version | u32 n | n bytes of "key=value\\n" config text
    | u32 tensor count | per tensor: u16 name length, name, u8 ndim, u32 dims, f32 LE data
    | u64 blake2b-64 of everything before it
"""
from __future__ import annotations

import hashlib
import struct

import numpy as np

from ..errors import UrlGuardError
from .model import ModelConfig, UrlNetPlus

MAGIC = b"URLB"
VERSION = 1
BUFFER_PREFIX = "buffer."
META_PREFIX = "meta."


class VersionMismatch(UrlGuardError):
    pass


class ChecksumMismatch(UrlGuardError):
    pass


def _checksum(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=8).digest()


def model_to_bytes(model: UrlNetPlus) -> bytes:
    lines = [f"{k}={v}" for k, v in model.config.to_text().items() if k != "dtype"]
    lines += [f"{META_PREFIX}{k}={v}" for k, v in sorted(model.meta.items())]
    config = ("\n".join(lines) + "\n").encode("utf-8")
    tensors = list(model.params.items()) + [(BUFFER_PREFIX + k, v) for k, v in model.buffers.items()]
    out = [MAGIC, struct.pack("<HI", VERSION, len(config)), config, struct.pack("<I", len(tensors))]
    for name, arr in tensors:
        nb = name.encode("utf-8")
        out.append(struct.pack("<H", len(nb)) + nb + struct.pack("<B", arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    body = b"".join(out)
    return body + _checksum(body)


def save_model(path, model: UrlNetPlus):
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(model))


def model_from_bytes(data: bytes) -> UrlNetPlus:
    if data[:4] != MAGIC:
        raise VersionMismatch("not a model file (bad magic)")
    if len(data) >= 6:
        (version,) = struct.unpack("<H", data[4:6])
        if version != VERSION:
            raise VersionMismatch(f"model format version {version}, expected {VERSION}")
    if len(data) < 4 + 6 + 4 + 8 or _checksum(data[:-8]) != data[-8:]:
        raise ChecksumMismatch("model file is truncated or corrupted")

    off = 6
    (n,) = struct.unpack_from("<I", data, off)
    off += 4
    text = data[off:off + n].decode("utf-8")
    off += n
    cfg_kv, meta = {}, {}
    for line in text.splitlines():
        if not line:
            continue
        key, _, value = line.partition("=")
        if key.startswith(META_PREFIX):
            meta[key[len(META_PREFIX):]] = value
        else:
            cfg_kv[key] = value
    cfg_kv["dtype"] = "float32"
    config = ModelConfig.from_text(cfg_kv)

    (count,) = struct.unpack_from("<I", data, off)
    off += 4
    tensors = {}
    for _ in range(count):
        (ln,) = struct.unpack_from("<H", data, off)
        off += 2
        name = data[off:off + ln].decode("utf-8")
        off += ln
        (ndim,) = struct.unpack_from("<B", data, off)
        off += 1
        shape = struct.unpack_from(f"<{ndim}I", data, off)
        off += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        tensors[name] = np.frombuffer(data, dtype="<f4", count=size, offset=off).reshape(shape).astype(np.float32)
        off += 4 * size

    model = UrlNetPlus.__new__(UrlNetPlus)
    model.config = config
    model.dtype = np.dtype(np.float32)
    model.meta = meta
    model.params = {}
    for name, shape in model._shapes():
        if name not in tensors:
            raise VersionMismatch(f"model file lacks tensor {name!r}")
        if tensors[name].shape != tuple(shape):
            raise VersionMismatch(f"tensor {name!r} has shape {tensors[name].shape}, expected {shape}")
        model.params[name] = tensors[name]
    model.buffers = {k[len(BUFFER_PREFIX):]: v for k, v in tensors.items() if k.startswith(BUFFER_PREFIX)}
    return model


def load_model(path) -> UrlNetPlus:
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())
