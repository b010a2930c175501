"""Versioned binary checkpoint container for named float64 tensors.

Layout (all integers little-endian):

    bytes 0..3    magic b"ADCK"
    bytes 4..7    format version, uint32
    bytes 8..15   header length H, uint64
    bytes 16..16+H-1   header, UTF-8 JSON
    remainder     tensor payload, concatenated little-endian float64 buffers

The header holds ``{"tensors": [{"name", "shape", "offset"}...],
"metadata": {...}, "metadata_hash": sha256-hex}``. ``offset`` counts float64
elements from the start of the payload. ``metadata`` carries schedule
constants, normalization, and configuration; its hash is recomputed on load
and must match, catching corruption and silent config drift.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile

import numpy as np

__all__ = [
    "CheckpointError",
    "save_checkpoint",
    "load_checkpoint",
    "metadata_hash",
    "atomic_write_bytes",
]

_MAGIC = b"ADCK"
_VERSION = 1


class CheckpointError(RuntimeError):
    pass


def metadata_hash(metadata: dict) -> str:
    canonical = json.dumps(metadata, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def atomic_write_bytes(path: str, payload: bytes):
    """Write via a temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_checkpoint(path: str, tensors: dict[str, np.ndarray], metadata: dict):
    entries = []
    buffers = []
    offset = 0
    for name, array in tensors.items():
        arr = np.ascontiguousarray(array, dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        buffers.append(arr.tobytes())
        offset += arr.size
    header = {
        "tensors": entries,
        "metadata": metadata,
        "metadata_hash": metadata_hash(metadata),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = b"".join(
        [_MAGIC, struct.pack("<I", _VERSION), struct.pack("<Q", len(header_bytes)), header_bytes]
        + buffers
    )
    atomic_write_bytes(path, blob)


def load_checkpoint(path: str):
    """Returns (tensors, metadata); validates magic, version, and hash."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    (version,) = struct.unpack("<I", blob[4:8])
    if version != _VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    (header_len,) = struct.unpack("<Q", blob[8:16])
    header = json.loads(blob[16 : 16 + header_len].decode("utf-8"))
    metadata = header["metadata"]
    if metadata_hash(metadata) != header["metadata_hash"]:
        raise CheckpointError(f"{path}: metadata hash mismatch")
    payload = np.frombuffer(blob[16 + header_len :], dtype="<f8")
    tensors = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape)) if shape else 1
        chunk = payload[entry["offset"] : entry["offset"] + size]
        if chunk.size != size:
            raise CheckpointError(f"{path}: truncated tensor {entry['name']!r}")
        tensors[entry["name"]] = chunk.reshape(shape).astype(np.float64)
    return tensors, metadata
