"""Weight checkpoints.

Layout (little-endian):
    4s   magic "PEPW"
    u32  version (1)
    u32  header length L
    L    UTF-8 JSON: {"arch", "spec", "param_names", "param_shapes", "extra"}
    u64  parameter count P
    P    f64 flat parameter vector
    u32  virtual vector length R (0 when absent)
    R    f64 virtual vector a
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..channels import DatasetFormatError, UnsupportedVersionError
from .nets import Model, build_model
from .spec import ModelSpec

MAGIC = b"PEPW"
VERSION = 1


class CheckpointFormatError(DatasetFormatError):
    pass


def save_checkpoint(model: Model, path, extra: dict | None = None) -> Path:
    path = Path(path)
    header = {
        "arch": model.spec.arch,
        "spec": model.spec.to_dict(),
        "seed": model.seed,
        "param_names": model.param_names(),
        "param_shapes": [list(p.shape) for p in model.param_list()],
        "extra": extra or {},
    }
    hb = json.dumps(header, sort_keys=True).encode()
    flat = model.get_flat().astype("<f8")
    a = np.zeros(0) if model.a is None else np.asarray(model.a, dtype="<f8")
    with open(path, "wb") as f:
        f.write(struct.pack("<4sII", MAGIC, VERSION, len(hb)))
        f.write(hb)
        f.write(struct.pack("<Q", flat.size))
        f.write(flat.tobytes())
        f.write(struct.pack("<I", a.size))
        f.write(a.astype("<f8").tobytes())
    return path


def _need(buf: bytes, off: int, n: int, what: str) -> None:
    if off + n > len(buf):
        raise CheckpointFormatError(f"truncated checkpoint while reading {what}", off)


def load_checkpoint(path) -> tuple[Model, dict]:
    """Returns (model, extra)."""
    buf = Path(path).read_bytes()
    _need(buf, 0, 12, "preamble")
    magic, version, hlen = struct.unpack_from("<4sII", buf, 0)
    if magic != MAGIC:
        raise CheckpointFormatError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
    if version != VERSION:
        raise UnsupportedVersionError(f"checkpoint version {version} not supported", 4)
    off = 12
    _need(buf, off, hlen, "header")
    try:
        header = json.loads(buf[off:off + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointFormatError(f"header is not valid JSON: {e}", off) from None
    off += hlen
    _need(buf, off, 8, "parameter count")
    (count,) = struct.unpack_from("<Q", buf, off)
    off += 8
    _need(buf, off, 8 * count, "parameters")
    flat = np.frombuffer(buf, dtype="<f8", count=count, offset=off).astype(np.float64)
    off += 8 * count
    _need(buf, off, 4, "virtual vector length")
    (na,) = struct.unpack_from("<I", buf, off)
    off += 4
    _need(buf, off, 8 * na, "virtual vector")
    a = np.frombuffer(buf, dtype="<f8", count=na, offset=off).astype(np.float64)
    off += 8 * na
    if off != len(buf):
        raise CheckpointFormatError(f"{len(buf) - off} trailing bytes", off)

    spec = ModelSpec.from_dict(header["spec"])
    model = build_model(spec, seed=header.get("seed", 0))
    if model.param_names() != header["param_names"]:
        raise CheckpointFormatError("parameter names do not match the architecture", 12)
    model.set_flat(flat)
    if na:
        model.a = a.copy()
    return model, header.get("extra", {})
