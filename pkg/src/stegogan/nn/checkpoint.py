"""Binary checkpoint container.

Layout (all integers little-endian)::

    offset  size  field
    0       4     magic  b"SGCK"
    4       4     format version (uint32, currently 1)
    8       8     header length H (uint64)
    16      H     UTF-8 JSON header
    16+H    ...   tensor data, concatenated

The JSON header has two keys: ``meta`` (free-form: master seed, configs,
architecture specs) and ``tensors``, a list of ``{name, dtype, shape,
offset, nbytes}`` records where ``offset`` is relative to the start of the
data section and ``dtype`` is a little-endian numpy type string (``<f4``,
``<f8``, ``<i8``).  Tensors are written in sorted name order and the header
with sorted keys, so identical contents give identical bytes.
"""
from __future__ import annotations

import json
import os
import struct

import numpy as np

from ..errors import CheckpointError

MAGIC = b"SGCK"
VERSION = 1
_DTYPES = {"<f4", "<f8", "<i8"}


def save_checkpoint(path, tensors: dict[str, np.ndarray], meta: dict | None = None) -> None:
    records, blobs, offset = [], [], 0
    for name in sorted(tensors):
        arr = np.asarray(tensors[name])
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        dtype = le.dtype.str
        if dtype not in _DTYPES:
            raise CheckpointError(f"{name}: unsupported dtype {arr.dtype}")
        raw = np.ascontiguousarray(le).tobytes()
        records.append({"name": name, "dtype": dtype, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({"meta": meta or {}, "tensors": records}, sort_keys=True).encode()
    with open(os.fspath(path), "wb") as fh:
        fh.write(MAGIC + struct.pack("<IQ", VERSION, len(header)) + header)
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise CheckpointError(f"{path}: {exc}") from exc
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    version, hlen = struct.unpack("<IQ", blob[4:16])
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    try:
        header = json.loads(blob[16:16 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header") from exc
    data = memoryview(blob)[16 + hlen:]
    tensors = {}
    for rec in header["tensors"]:
        start, n = rec["offset"], rec["nbytes"]
        if rec["dtype"] not in _DTYPES or start + n > len(data):
            raise CheckpointError(f"{path}: truncated or corrupt tensor {rec['name']!r}")
        arr = np.frombuffer(data[start:start + n], dtype=rec["dtype"])
        if arr.size != int(np.prod(rec["shape"])):
            raise CheckpointError(f"{path}: shape mismatch for {rec['name']!r}")
        tensors[rec["name"]] = arr.reshape(rec["shape"]).astype(np.dtype(rec["dtype"]).newbyteorder("="))
    return tensors, header["meta"]
