"""Single-file binary checkpoints.

Layout (all integers little-endian)::

    magic      8 bytes   b"LSRCKPT\\x00"
    version    uint32    currently 1
    hdr_len    uint64    length of the JSON header in bytes
    header     hdr_len   UTF-8 JSON: {"config", "vocab", "epoch", "history",
                         "threshold", "tensors": [{"name", "shape"}, ...]}
    payload              each tensor in header order, float64 '<f8', C order

Round trips are bit-exact.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"LSRCKPT\x00"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    config: dict
    vocab: list[str]
    tensors: dict[str, np.ndarray]
    epoch: int = 0
    history: list[dict] = field(default_factory=list)
    threshold: float | None = None


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    header = {
        "config": ckpt.config,
        "vocab": ckpt.vocab,
        "epoch": ckpt.epoch,
        "history": ckpt.history,
        "threshold": ckpt.threshold,
        "tensors": [{"name": k, "shape": list(v.shape)} for k, v in ckpt.tensors.items()],
    }
    raw = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(raw)))
        fh.write(raw)
        for v in ckpt.tensors.values():
            fh.write(np.ascontiguousarray(v, dtype="<f8").tobytes())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    (version,) = struct.unpack_from("<I", blob, 8)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    (hlen,) = struct.unpack_from("<Q", blob, 12)
    header = json.loads(blob[20:20 + hlen].decode("utf-8"))
    off = 20 + hlen
    tensors = {}
    for spec in header["tensors"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = off + 8 * count
        if end > len(blob):
            raise CheckpointError(f"{path}: truncated payload at tensor {spec['name']}")
        tensors[spec["name"]] = np.frombuffer(blob[off:end], dtype="<f8").astype(np.float64).reshape(shape)
        off = end
    if off != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - off} trailing bytes")
    return Checkpoint(header["config"], header["vocab"], tensors, header["epoch"], header["history"],
                      header["threshold"])
