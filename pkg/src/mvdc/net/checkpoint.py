"""Versioned binary checkpoint container.

Layout (little-endian):
  magic "MVDCCKPT", version u32, sha256(config text) 32 bytes,
  config length u32 + utf-8 config text,
  tensor count u32, then per tensor:
    name length u16 + utf-8 name, dtype u8, ndim u8, dims u32 each, raw data.

Tensor names are sorted so identical states serialize to identical bytes.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np
import torch

from ..errors import ParseError
from .config import TrainConfig

MAGIC = b"MVDCCKPT"
VERSION = 1

_DTYPES = {0: np.float32, 1: np.float64, 2: np.int64}
_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1, np.dtype(np.int64): 2}


def save_checkpoint(path, config: TrainConfig, tensors: dict[str, torch.Tensor]) -> None:
    config_text = config.to_text().encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(hashlib.sha256(config_text).digest())
        fh.write(struct.pack("<I", len(config_text)))
        fh.write(config_text)
        fh.write(struct.pack("<I", len(tensors)))
        for name in sorted(tensors):
            arr = tensors[name].detach().cpu().numpy()
            code = _DTYPE_CODES.get(arr.dtype)
            if code is None:
                raise ValueError(f"unsupported checkpoint dtype {arr.dtype} for {name}")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<BB", code, arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(np.ascontiguousarray(arr).astype(arr.dtype, copy=False).tobytes())


def load_checkpoint(path) -> tuple[TrainConfig, dict[str, torch.Tensor]]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[: len(MAGIC)] != MAGIC:
        raise ParseError("not a checkpoint file (bad magic)", path=path, offset=0)
    pos = len(MAGIC)

    def unpack(fmt: str):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(data):
            raise ParseError("truncated checkpoint", path=path, offset=pos)
        out = struct.unpack_from(fmt, data, pos)
        pos += size
        return out

    (version,) = unpack("<I")
    if version != VERSION:
        raise ParseError(f"unsupported checkpoint version {version}", path=path)
    digest = data[pos : pos + 32]
    pos += 32
    (config_len,) = unpack("<I")
    config_text = data[pos : pos + config_len]
    pos += config_len
    if hashlib.sha256(config_text).digest() != digest:
        raise ParseError("config hash mismatch", path=path)
    config = TrainConfig.from_text(config_text.decode("utf-8"), path=path)
    (count,) = unpack("<I")
    tensors: dict[str, torch.Tensor] = {}
    for _ in range(count):
        (name_len,) = unpack("<H")
        name = data[pos : pos + name_len].decode("utf-8")
        pos += name_len
        code, ndim = unpack("<BB")
        if code not in _DTYPES:
            raise ParseError(f"unknown dtype code {code} for {name}", path=path, offset=pos)
        dims = [unpack("<I")[0] for _ in range(ndim)]
        dtype = np.dtype(_DTYPES[code])
        nbytes = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize if dims else dtype.itemsize
        raw = data[pos : pos + nbytes]
        if len(raw) != nbytes:
            raise ParseError(f"truncated tensor data for {name}", path=path, offset=pos)
        pos += nbytes
        arr = np.frombuffer(raw, dtype=dtype).reshape(dims).copy()
        tensors[name] = torch.from_numpy(arr)
    return config, tensors


def restore_train_state(path):
    """Rebuild a full training state (nets, optimizers, step) from a file."""
    from .train import build_train_state

    config, tensors = load_checkpoint(path)
    state = build_train_state(config)
    g_state = {k[len("g.") :]: v for k, v in tensors.items() if k.startswith("g.")}
    state.generator.load_state_dict(g_state)
    d_state = {k[len("d.") :]: v for k, v in tensors.items() if k.startswith("d.")}
    if d_state:
        state.discriminator.load_state_dict(d_state)
    state.opt_g.load_state_tensors("opt_g", tensors)
    state.opt_d.load_state_tensors("opt_d", tensors)
    state.step = int(tensors["step"].item())
    return state
