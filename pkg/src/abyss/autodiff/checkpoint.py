"""Versioned binary checkpoint files.

Layout: magic line ``ABYSS-CKPT v1``, a 8-byte little-endian header
length, a JSON header, then the raw little-endian float32 parameter
data in header order. The header carries parameter shapes, buffer
shapes, and an arbitrary JSON `meta` dict (scenario fingerprint,
episode counters, ...).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .layers import BatchNormState
from .params import ParamStore

MAGIC = b"ABYSS-CKPT v1\n"


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path, store: ParamStore, meta: dict | None = None):
    path = Path(path)
    entries = []
    blobs = []
    for name in sorted(store.params):
        arr = np.ascontiguousarray(store.params[name].data, dtype="<f4")
        entries.append({"name": name, "shape": list(arr.shape), "kind": "param"})
        blobs.append(arr.tobytes())
    for name in sorted(store.buffers):
        st = store.buffers[name]
        for field in ("mean", "var"):
            arr = np.ascontiguousarray(getattr(st, field), dtype="<f4")
            entries.append({"name": f"{name}.{field}", "shape": list(arr.shape), "kind": "buffer"})
            blobs.append(arr.tobytes())
    header = json.dumps({"entries": entries, "meta": meta or {}}, sort_keys=True).encode()
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(len(header).to_bytes(8, "little"))
        f.write(header)
        for blob in blobs:
            f.write(blob)


def load_checkpoint(path, store: ParamStore) -> dict:
    """Load values into an already-constructed, shape-matching store.

    Returns the checkpoint's meta dict. A missing or shape-mismatched
    entry raises CheckpointError naming the offending parameter.
    """
    path = Path(path)
    with open(path, "rb") as f:
        if f.read(len(MAGIC)) != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
        hlen = int.from_bytes(f.read(8), "little")
        header = json.loads(f.read(hlen))
        names_seen = set()
        for entry in header["entries"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(f.read(4 * count), dtype="<f4").reshape(shape)
            name = entry["name"]
            names_seen.add(name)
            if entry["kind"] == "param":
                if name not in store.params:
                    raise CheckpointError(f"{path}: unknown parameter '{name}' for this configuration")
                t = store.params[name]
                if t.shape != shape:
                    raise CheckpointError(
                        f"{path}: parameter '{name}' has shape {shape}, model expects {t.shape}")
                t.data[...] = arr.astype(t.data.dtype)
            else:
                base, field = name.rsplit(".", 1)
                if base not in store.buffers:
                    raise CheckpointError(f"{path}: unknown buffer '{base}'")
                target = getattr(store.buffers[base], field)
                if target.shape != shape:
                    raise CheckpointError(f"{path}: buffer '{name}' has shape {shape}, model expects {target.shape}")
                target[...] = arr.astype(target.dtype)
    expected = {n for n in store.params}
    expected |= {f"{n}.{f}" for n in store.buffers for f in ("mean", "var")}
    missing = expected - names_seen
    if missing:
        raise CheckpointError(f"{path}: checkpoint misses entries: {sorted(missing)[:4]} ...")
    return header["meta"]


def read_meta(path) -> dict:
    with open(path, "rb") as f:
        if f.read(len(MAGIC)) != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
        hlen = int.from_bytes(f.read(8), "little")
        return json.loads(f.read(hlen))["meta"]
