"""Versioned binary checkpoint container.

Layout (all integers little-endian)::

    b"DBNC"            magic
    uint32             format version
    uint32             header length N
    N bytes            UTF-8 JSON header (sorted keys, no whitespace)
    ...                tensor blobs, little-endian, in header order

The header records every blob's name, dtype, shape and byte offset, plus the
width multiplier, loss convention, iteration counter, Adam step count, the
training config and the RNG state needed for bit-identical resumption.
"""
import json
import struct
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from deblurnet.errors import CheckpointError
from deblurnet.network import DeblurNetParams
from deblurnet.optim import AdamState

MAGIC = b"DBNC"
VERSION = 1
LOSS_CONVENTION = "mean"


@dataclass
class Checkpoint:
    params: DeblurNetParams
    adam: AdamState = None
    iteration: int = 0
    config: dict = field(default_factory=dict)
    rng_state: dict = None
    loss_convention: str = LOSS_CONVENTION


def _blobs(ckpt):
    params = ckpt.params
    for name, p in params.named_parameters():
        yield f"param/{name}", p.data
    for name, buf in params.named_buffers():
        yield f"buffer/{name}", buf
    if ckpt.adam is not None:
        names = [n for n, _ in params.named_parameters()]
        for name, m in zip(names, ckpt.adam.m):
            yield f"adam_m/{name}", m
        for name, v in zip(names, ckpt.adam.v):
            yield f"adam_v/{name}", v


def to_bytes(ckpt):
    entries = []
    payload = []
    offset = 0
    for name, arr in _blobs(ckpt):
        le = np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<"))
        raw = le.tobytes()
        entries.append({"name": name, "dtype": le.dtype.str, "shape": list(arr.shape),
                        "offset": offset, "nbytes": len(raw)})
        payload.append(raw)
        offset += len(raw)
    header = {
        "format": "deblurnet-checkpoint",
        "width_multiplier": str(ckpt.params.width_multiplier),
        "dtype": ckpt.params.dtype.str,
        "loss_convention": ckpt.loss_convention,
        "iteration": int(ckpt.iteration),
        "adam_t": None if ckpt.adam is None else int(ckpt.adam.t),
        "config": ckpt.config,
        "rng_state": ckpt.rng_state,
        "tensors": entries,
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return b"".join([MAGIC, struct.pack("<II", VERSION, len(hbytes)), hbytes, *payload])


def save(ckpt, path):
    data = to_bytes(ckpt)
    with open(path, "wb") as fh:
        fh.write(data)
    return path


def from_bytes(data):
    if data[:4] != MAGIC:
        raise CheckpointError("not a deblurnet checkpoint (bad magic)")
    version, hlen = struct.unpack("<II", data[4:12])
    if version != VERSION:
        raise CheckpointError(f"checkpoint version {version} is not supported (expected {VERSION})")
    header = json.loads(data[12:12 + hlen].decode("utf-8"))
    base = 12 + hlen
    arrays = {}
    for e in header["tensors"]:
        start = base + e["offset"]
        arr = np.frombuffer(data, dtype=np.dtype(e["dtype"]), count=int(np.prod(e["shape"], dtype=np.int64)),
                            offset=start).reshape(e["shape"])
        arrays[e["name"]] = arr.astype(arr.dtype.newbyteorder("="))

    dtype = np.dtype(header["dtype"]).newbyteorder("=")
    params = DeblurNetParams.create(Fraction(header["width_multiplier"]), seed=0, dtype=dtype)
    for name, p in params.named_parameters():
        _assign(p.data, arrays, f"param/{name}")
    for name, buf in params.named_buffers():
        _assign(buf, arrays, f"buffer/{name}")

    adam = None
    if header["adam_t"] is not None:
        names = [n for n, _ in params.named_parameters()]
        adam = AdamState(m=[arrays[f"adam_m/{n}"].copy() for n in names],
                         v=[arrays[f"adam_v/{n}"].copy() for n in names],
                         t=header["adam_t"])
    return Checkpoint(params=params, adam=adam, iteration=header["iteration"],
                      config=header["config"], rng_state=header["rng_state"],
                      loss_convention=header["loss_convention"])


def _assign(target, arrays, key):
    if key not in arrays:
        raise CheckpointError(f"checkpoint is missing tensor {key}")
    src = arrays[key]
    if src.shape != target.shape:
        raise CheckpointError(f"{key}: shape {src.shape} != model shape {target.shape}")
    target[...] = src


def load(path):
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
