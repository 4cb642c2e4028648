"""Checkpoint container: a JSON manifest followed by raw float32 blobs.

Layout: magic ``UCKP``, little-endian u32 manifest length, UTF-8 JSON
manifest, then the named arrays back to back as little-endian float32.
The manifest records name, shape, and byte offset of every array plus an
arbitrary JSON metadata object; load(save(x)) is bit-exact.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ucodec.errors import FormatError

MAGIC = b"UCKP"


def save(path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    entries = []
    offset = 0
    blobs = []
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype="<f4")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blob = arr.tobytes()
        blobs.append(blob)
        offset += len(blob)
    manifest = json.dumps({"meta": meta, "arrays": entries}).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(manifest)))
        f.write(manifest)
        for blob in blobs:
            f.write(blob)


def load_meta(path) -> dict:
    """Read only the manifest metadata (cheap compatibility checks)."""
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise FormatError(f"{path}: not a checkpoint file")
        (mlen,) = struct.unpack("<I", f.read(4))
        return json.loads(f.read(mlen).decode("utf-8"))["meta"]


def load(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise FormatError(f"{path}: not a checkpoint file")
        (mlen,) = struct.unpack("<I", f.read(4))
        manifest = json.loads(f.read(mlen).decode("utf-8"))
        payload = f.read()
    arrays = {}
    for entry in manifest["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + 4 * count
        if end > len(payload):
            raise FormatError(f"{path}: truncated checkpoint payload")
        arrays[entry["name"]] = np.frombuffer(payload[start:end], dtype="<f4").reshape(shape).copy()
    return manifest["meta"], arrays
