"""Binary parameter checkpoints.

Layout (all integers little-endian)::

    magic     8 bytes   b"RNMSRCK1"
    hlen      uint32    length of the JSON header in bytes
    header    hlen      UTF-8 JSON: {"version", "meta", "params": [...]}
    payload             concatenated float64 blocks, in header order

Each ``params`` entry is ``{"name", "shape", "step", "moments"}``.  For every
entry the payload holds ``value`` and, when ``moments`` is true, the Adam
first and second moments, each ``prod(shape)`` doubles long.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .tensor import Param

MAGIC = b"RNMSRCK1"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save(path, params: dict[str, Param], meta: dict | None = None, moments: bool = True) -> None:
    entries, blocks = [], []
    for name, p in params.items():
        entries.append({"name": name, "shape": list(p.shape), "step": int(p.step), "moments": moments})
        blocks.append(p.data)
        if moments:
            blocks.extend([p.m, p.v])
    header = json.dumps({"version": VERSION, "meta": meta or {}, "params": entries}).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for b in blocks:
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load(path) -> tuple[dict[str, Param], dict]:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: not an RNMSR checkpoint")
    (hlen,) = struct.unpack("<I", raw[8:12])
    header = json.loads(raw[12 : 12 + hlen])
    if header.get("version") != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {header.get('version')}")
    offset = 12 + hlen
    params = {}

    def take(shape):
        nonlocal offset
        n = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f8", count=n, offset=offset).reshape(shape)
        offset += 8 * n
        return arr.astype(np.float64)

    for e in header["params"]:
        p = Param(take(e["shape"]), name=e["name"])
        if e["moments"]:
            p.m, p.v = take(e["shape"]), take(e["shape"])
        p.step = e["step"]
        params[e["name"]] = p
    if offset != len(raw):
        raise CheckpointError(f"{path}: trailing bytes after payload")
    return params, header["meta"]
