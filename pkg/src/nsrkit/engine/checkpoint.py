"""Binary container for named float32 arrays.

Layout (all integers little-endian)::

    magic    4 bytes   b"NSRK"
    version  uint32    FORMAT_VERSION
    hlen     uint32    byte length of the JSON header
    header   hlen      UTF-8 JSON: {"meta": {...}, "tensors": [{"name", "shape", "offset", "nbytes"}, ...]}
    payload  ...       concatenated little-endian float32 arrays, offsets relative to payload start

``meta`` is free-form JSON supplied by the caller (model config, architecture
fingerprint). Arrays are written as ``<f4`` so a save/load round trip is
bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Dict, Tuple

import numpy as np

MAGIC = b"NSRK"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_arrays(path, arrays: Dict[str, np.ndarray], meta: dict | None = None) -> None:
    entries, blobs, offset = [], [], 0
    for name in sorted(arrays):
        buf = np.ascontiguousarray(arrays[name], dtype="<f4").tobytes()
        entries.append({"name": name, "shape": list(np.shape(arrays[name])), "offset": offset,
                        "nbytes": len(buf)})
        blobs.append(buf)
        offset += len(buf)
    header = json.dumps({"meta": meta or {}, "tensors": entries}, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(header)))
        fh.write(header)
        for b in blobs:
            fh.write(b)
    tmp.replace(path)


def load_arrays(path) -> Tuple[Dict[str, np.ndarray], dict]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic {raw[:4]!r})")
    if len(raw) < 12:
        raise CheckpointError(f"{path}: truncated header")
    version, hlen = struct.unpack("<II", raw[4:12])
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    try:
        header = json.loads(raw[12:12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from None
    payload = memoryview(raw)[12 + hlen:]
    arrays = {}
    for e in header["tensors"]:
        count = int(np.prod(e["shape"], dtype=np.int64))
        if e["nbytes"] != 4 * count or e["offset"] + e["nbytes"] > len(payload):
            raise CheckpointError(f"{path}: tensor {e['name']!r} payload out of bounds")
        arr = np.frombuffer(payload[e["offset"]:e["offset"] + e["nbytes"]], dtype="<f4")
        arrays[e["name"]] = arr.astype(np.float32).reshape(e["shape"])
    return arrays, header["meta"]
