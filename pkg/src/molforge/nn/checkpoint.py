"""Checkpoint I/O: JSON manifest + one little-endian float32 blob."""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .layers import Module


def save_checkpoint(module: Module, path: str, extra: dict | None = None) -> None:
    """Write ``<path>.json`` (name -> shape, offset) and ``<path>.bin``."""
    path = Path(path)
    entries = {}
    blobs = []
    offset = 0
    for name, p in module.named_parameters():
        data = np.ascontiguousarray(p.data, dtype="<f4")
        entries[name] = {"shape": list(data.shape), "offset": offset}
        blobs.append(data.tobytes())
        offset += data.nbytes
    manifest = {"format_version": 1, "dtype": "<f4", "total_bytes": offset,
                "tensors": entries}
    if extra:
        manifest["extra"] = extra
    tmp_bin = path.with_suffix(".bin.tmp")
    tmp_bin.write_bytes(b"".join(blobs))
    os.replace(tmp_bin, path.with_suffix(".bin"))
    tmp_json = path.with_suffix(".json.tmp")
    tmp_json.write_text(json.dumps(manifest, indent=2, sort_keys=True),
                        encoding="utf-8")
    os.replace(tmp_json, path.with_suffix(".json"))


def load_checkpoint(module: Module, path: str) -> dict:
    """Load parameters in place; returns the manifest's ``extra`` dict."""
    path = Path(path)
    manifest = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    blob = path.with_suffix(".bin").read_bytes()
    named = dict(module.named_parameters())
    if set(named) != set(manifest["tensors"]):
        missing = set(named) ^ set(manifest["tensors"])
        raise ValueError(f"checkpoint/model parameter mismatch: {sorted(missing)[:5]}")
    for name, meta in manifest["tensors"].items():
        shape = tuple(meta["shape"])
        n = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f4", count=n,
                            offset=meta["offset"]).reshape(shape)
        p = named[name]
        if p.data.shape != shape:
            raise ValueError(f"shape mismatch for {name}: {p.data.shape} vs {shape}")
        p.data = arr.astype(p.data.dtype)
    return manifest.get("extra", {})
