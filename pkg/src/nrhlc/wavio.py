"""Mono 16 kHz WAV I/O.

Reads 16-bit PCM and 32/64-bit float files; writes 32-bit float by default
and 64-bit float on request (lossless for float64 signals). An optional
JSON manifest is stored in a LIST/INFO ICMT chunk so written files carry
their provenance.
"""
from __future__ import annotations

import json
import struct
import warnings
from pathlib import Path

import numpy as np
import scipy.io.wavfile

from .dsp import SAMPLE_RATE


class WavFormatError(ValueError):
    pass


def read_wav(path, expected_rate: int = SAMPLE_RATE) -> np.ndarray:
    with warnings.catch_warnings():
        # scipy warns about the LIST chunk it does not parse
        warnings.simplefilter("ignore", scipy.io.wavfile.WavFileWarning)
        rate, data = scipy.io.wavfile.read(path)
    if rate != expected_rate:
        raise WavFormatError(f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz")
    if data.ndim != 1:
        raise WavFormatError(f"{path}: expected mono audio, got {data.shape[1]} channels")
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype in (np.float32, np.float64):
        return data.astype(np.float64)
    raise WavFormatError(f"{path}: unsupported sample format {data.dtype}")


def _info_chunk(comment: str) -> bytes:
    text = comment.encode("utf-8") + b"\x00"
    if len(text) % 2:
        text += b"\x00"
    sub = b"ICMT" + struct.pack("<I", len(text)) + text
    body = b"INFO" + sub
    return b"LIST" + struct.pack("<I", len(body)) + body


SAMPLE_FORMATS = {"float32": "<f4", "float64": "<f8"}


def write_wav(path, samples, manifest: dict | None = None, rate: int = SAMPLE_RATE,
              sample_format: str = "float32") -> None:
    if sample_format not in SAMPLE_FORMATS:
        raise WavFormatError(f"sample_format must be one of {sorted(SAMPLE_FORMATS)}")
    dtype = np.dtype(SAMPLE_FORMATS[sample_format])
    data = np.asarray(samples, dtype=dtype)
    if data.ndim != 1:
        raise WavFormatError("only mono signals can be written")
    if not np.all(np.isfinite(data)):
        raise WavFormatError("refusing to write NaN/Inf samples")
    width = dtype.itemsize
    fmt = struct.pack("<HHIIHH", 3, 1, rate, rate * width, width, 8 * width)
    chunks = b"fmt " + struct.pack("<I", len(fmt)) + fmt
    # non-PCM formats require a fact chunk
    chunks += b"fact" + struct.pack("<II", 4, data.shape[0])
    if manifest is not None:
        chunks += _info_chunk(json.dumps(manifest, sort_keys=True))
    payload = data.tobytes()
    chunks += b"data" + struct.pack("<I", len(payload)) + payload
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks)


def read_manifest(path) -> dict | None:
    """Return the JSON manifest stored by `write_wav`, or None."""
    raw = Path(path).read_bytes()
    pos = 12
    while pos + 8 <= len(raw):
        cid, size = raw[pos:pos + 4], struct.unpack("<I", raw[pos + 4:pos + 8])[0]
        body = raw[pos + 8:pos + 8 + size]
        if cid == b"LIST" and body[:4] == b"INFO":
            sub = 4
            while sub + 8 <= len(body):
                sid, ssize = body[sub:sub + 4], struct.unpack("<I", body[sub + 4:sub + 8])[0]
                if sid == b"ICMT":
                    return json.loads(body[sub + 8:sub + 8 + ssize].rstrip(b"\x00").decode("utf-8"))
                sub += 8 + ssize + (ssize % 2)
        pos += 8 + size + (size % 2)
    return None
