"""Versioned binary container for parameter tensors and run metadata.

Layout: 8 magic bytes, little-endian uint32 format version, little-endian
uint64 header length, a UTF-8 JSON header (metadata plus per-tensor name,
shape, offset, count, and a payload digest), then the payload: each tensor
as 64-bit little-endian reals in first-mode-fastest order.  Round trips
are bit-exact.
"""

from __future__ import annotations

import hashlib
import json
import struct
from typing import Mapping

import numpy as np

__all__ = [
    "CheckpointError",
    "save_checkpoint",
    "load_checkpoint",
    "save_tensor",
    "load_tensor",
    "save_tt",
    "load_tt",
]

MAGIC = b"RGTNCKPT"
VERSION = 1


class CheckpointError(ValueError):
    """File is not a readable checkpoint of a supported version."""


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def save_checkpoint(path: str, arrays: Mapping[str, np.ndarray], meta: dict) -> None:
    entries = []
    chunks = []
    offset = 0
    for name, arr in arrays.items():
        a = np.asarray(arr, dtype=np.float64)
        chunks.append(a.ravel(order="F").astype("<f8").tobytes())
        entries.append(
            {"name": name, "shape": list(a.shape), "offset": offset, "count": int(a.size)}
        )
        offset += a.size
    payload = b"".join(chunks)
    header = {
        "version": VERSION,
        "meta": _jsonable(meta),
        "params": entries,
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    head_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(head_bytes)))
        fh.write(head_bytes)
        fh.write(payload)


def load_checkpoint(path: str) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) + 12 or blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic bytes)")
    pos = len(MAGIC)
    (version,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    if version > VERSION:
        raise CheckpointError(
            f"{path}: format version {version} is newer than supported {VERSION}"
        )
    (head_len,) = struct.unpack_from("<Q", blob, pos)
    pos += 8
    try:
        header = json.loads(blob[pos : pos + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupted header ({exc})") from None
    payload = blob[pos + head_len :]
    digest = hashlib.sha256(payload).hexdigest()
    if digest != header.get("payload_sha256"):
        raise CheckpointError(f"{path}: payload digest mismatch, file corrupted")
    arrays: dict[str, np.ndarray] = {}
    for entry in header["params"]:
        start = entry["offset"] * 8
        stop = start + entry["count"] * 8
        flat = np.frombuffer(payload[start:stop], dtype="<f8").astype(np.float64)
        if flat.size != entry["count"]:
            raise CheckpointError(f"{path}: truncated payload for {entry['name']!r}")
        arrays[entry["name"]] = flat.reshape(entry["shape"], order="F")
    meta = dict(header["meta"])
    meta["format_version"] = version
    return arrays, meta


def save_tensor(path: str, array: np.ndarray) -> None:
    save_checkpoint(path, {"tensor": np.asarray(array)}, {"kind": "tensor"})


def load_tensor(path: str) -> np.ndarray:
    arrays, meta = load_checkpoint(path)
    if meta.get("kind") != "tensor" or "tensor" not in arrays:
        raise CheckpointError(f"{path}: not a tensor file")
    return arrays["tensor"]


def save_tt(path: str, cores: list[np.ndarray], meta: dict | None = None) -> None:
    arrays = {f"core{k}": core for k, core in enumerate(cores)}
    info = {"kind": "tt", "n_cores": len(cores)}
    info.update(meta or {})
    save_checkpoint(path, arrays, info)


def load_tt(path: str) -> tuple[list[np.ndarray], dict]:
    arrays, meta = load_checkpoint(path)
    if meta.get("kind") != "tt":
        raise CheckpointError(f"{path}: not a tensor-train file")
    cores = [arrays[f"core{k}"] for k in range(int(meta["n_cores"]))]
    return cores, meta
