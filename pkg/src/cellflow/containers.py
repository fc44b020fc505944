"""Binary container formats for flow tensors and patch-video tensors.

CFLO (flow): magic ``CFLO``, u32 version=1, u32 pair count, u32 height,
u32 width, then pair*H*W float32 for u, then the same for v, row-major,
frame-major.  CVID (patch video): magic ``CVID``, u32 version=1, u32 frames,
u32 patch size, u32 channels=3, then K*N*N*3 float32 in (frame, row, col,
channel) order, then a u32-length-prefixed UTF-8 JSON metadata blob.  All
integers and floats little-endian.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import CellflowError
from .flow import FlowField

CFLO_MAGIC = b"CFLO"
CVID_MAGIC = b"CVID"
FORMAT_VERSION = 1

METADATA_KEYS = (
    "culture",
    "x",
    "y",
    "start_frame",
    "frame_stride",
    "normalized",
    "flipped_h",
    "flipped_v",
)


class ContainerFormatError(CellflowError):
    """Malformed or truncated container file."""


def _read_exact(fh, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise ContainerFormatError(f"truncated file: wanted {n} bytes, got {len(data)}")
    return data


def write_flow_file(path, fields: list[FlowField]) -> None:
    """Serialize per-pair flow fields to a CFLO file."""
    if not fields:
        raise ValueError("need at least one flow field")
    h, w = fields[0].shape
    for f in fields:
        if f.shape != (h, w):
            raise ValueError(f"inconsistent flow shapes: {f.shape} vs {(h, w)}")
    u = np.stack([f.u for f in fields]).astype("<f4")
    v = np.stack([f.v for f in fields]).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(CFLO_MAGIC)
        fh.write(struct.pack("<IIII", FORMAT_VERSION, len(fields), h, w))
        fh.write(u.tobytes())
        fh.write(v.tobytes())


def read_flow_file(path) -> list[FlowField]:
    """Read a CFLO file back into float64 flow fields."""
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4)
        if magic != CFLO_MAGIC:
            raise ContainerFormatError(f"bad magic {magic!r}, expected {CFLO_MAGIC!r}")
        version, pairs, h, w = struct.unpack("<IIII", _read_exact(fh, 16))
        if version != FORMAT_VERSION:
            raise ContainerFormatError(f"unsupported version {version}")
        count = pairs * h * w
        u = np.frombuffer(_read_exact(fh, count * 4), dtype="<f4").reshape(pairs, h, w)
        v = np.frombuffer(_read_exact(fh, count * 4), dtype="<f4").reshape(pairs, h, w)
        if fh.read(1):
            raise ContainerFormatError("trailing bytes after flow payload")
    return [
        FlowField(u=u[k].astype(np.float64), v=v[k].astype(np.float64))
        for k in range(pairs)
    ]


def write_patch_file(path, tensor: np.ndarray, metadata: dict) -> None:
    """Serialize one (K, N, N, 3) patch tensor plus its provenance blob."""
    tensor = np.asarray(tensor)
    if tensor.ndim != 4 or tensor.shape[1] != tensor.shape[2] or tensor.shape[3] != 3:
        raise ValueError(f"patch tensor must be (K, N, N, 3), got {tensor.shape}")
    missing = [k for k in METADATA_KEYS if k not in metadata]
    if missing:
        raise ValueError(f"metadata missing keys: {missing}")
    k, n = tensor.shape[0], tensor.shape[1]
    blob = json.dumps(metadata, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CVID_MAGIC)
        fh.write(struct.pack("<IIII", FORMAT_VERSION, k, n, 3))
        fh.write(tensor.astype("<f4").tobytes())
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)


def read_patch_file(path) -> tuple[np.ndarray, dict]:
    """Read a CVID file; returns the float32 tensor and its metadata."""
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4)
        if magic != CVID_MAGIC:
            raise ContainerFormatError(f"bad magic {magic!r}, expected {CVID_MAGIC!r}")
        version, k, n, channels = struct.unpack("<IIII", _read_exact(fh, 16))
        if version != FORMAT_VERSION:
            raise ContainerFormatError(f"unsupported version {version}")
        if channels != 3:
            raise ContainerFormatError(f"expected 3 channels, got {channels}")
        count = k * n * n * channels
        tensor = np.frombuffer(_read_exact(fh, count * 4), dtype="<f4")
        tensor = tensor.reshape(k, n, n, channels).copy()
        (blob_len,) = struct.unpack("<I", _read_exact(fh, 4))
        metadata = json.loads(_read_exact(fh, blob_len).decode("utf-8"))
        if fh.read(1):
            raise ContainerFormatError("trailing bytes after metadata blob")
    return tensor, metadata


def write_manifest(path, records: list[dict]) -> None:
    Path(path).write_text(json.dumps(records, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def read_manifest(path) -> list[dict]:
    return json.loads(Path(path).read_text(encoding="utf-8"))
