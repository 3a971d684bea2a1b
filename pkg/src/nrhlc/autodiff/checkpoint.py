"""Flat binary archive of named arrays.

Layout (little-endian):

    magic   8 bytes   b"NRHLCARR"
    version uint32    FORMAT_VERSION
    hlen    uint64    length of the JSON header
    header  hlen      {"arrays": [{"name", "dtype", "shape", "offset"}...], "meta": {...}}
    data              row-major array payloads at the recorded offsets

Files are byte-deterministic for identical inputs.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"NRHLCARR"
FORMAT_VERSION = 1
_DTYPES = {"f8": "<f8", "i8": "<i8", "u8": "<u8"}


class ArchiveError(ValueError):
    pass


def save_arrays(path, arrays: dict, meta: dict | None = None) -> None:
    entries, blobs, offset = [], [], 0
    for name in sorted(arrays):
        arr = np.asarray(arrays[name])
        kind = {"f": "f8", "i": "i8", "u": "u8"}.get(arr.dtype.kind)
        if kind is None:
            raise ArchiveError(f"{name}: unsupported dtype {arr.dtype}")
        blob = np.ascontiguousarray(arr, dtype=_DTYPES[kind]).tobytes()
        entries.append({"name": name, "dtype": kind, "shape": list(arr.shape), "offset": offset})
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps({"arrays": entries, "meta": meta or {}}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<IQ", FORMAT_VERSION, len(header)) + header)
        for blob in blobs:
            fh.write(blob)


def load_arrays(path) -> tuple[dict, dict]:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ArchiveError(f"{path}: not an nrhlc array archive")
    version, hlen = struct.unpack("<IQ", raw[8:20])
    if version != FORMAT_VERSION:
        raise ArchiveError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    header = json.loads(raw[20:20 + hlen])
    base = 20 + hlen
    arrays = {}
    for e in header["arrays"]:
        dtype = np.dtype(_DTYPES[e["dtype"]])
        count = int(np.prod(e["shape"], dtype=np.int64))
        start = base + e["offset"]
        data = np.frombuffer(raw, dtype=dtype, count=count, offset=start)
        arrays[e["name"]] = data.reshape(e["shape"]).astype(dtype.newbyteorder("="))
    return arrays, header["meta"]
