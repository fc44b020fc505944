"""Training-sample construction from high-resolution grayscale videos.

A sample is a (K, N, N, 3) float32 tensor: channel 0 holds the cropped
video, channels 1 and 2 the per-frame x- and y-velocities computed on that
crop.  K frames yield K-1 flow fields; the final frame's flow slots are
zero-padded, zero being the "no information" value for signed velocities.

Patch origins advance by stride (1 - a) * w_p so that ``a`` is literally the
fraction of overlap between neighboring patches, and a tail origin is
snapped to the last valid position so the grid covers the whole frame.
``literal_step=True`` switches to the stride a * w_p with no tail snap, for
replicating runs that used that enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .containers import write_manifest, write_patch_file
from .errors import DimensionError, NumericError
from .flow import FlowParams, video_flow

__all__ = [
    "PatchSpec",
    "SourceVideo",
    "PatchSample",
    "patch_grid",
    "extract_patches",
    "fill_flow_channels",
    "normalize_per_channel",
    "augment",
    "export_dataset",
    "load_frames_dir",
]

CHANNEL_VIDEO = 0
CHANNEL_FLOW_X = 1
CHANNEL_FLOW_Y = 2

# Label vocabulary of the culture catalog.
DENSITY_LABELS = ("Very Sparse", "Moderate", "Dense", "Very Dense")
MATURITY_LABELS = ("Very Young", "Mature", "Very Mature")


@dataclass(frozen=True)
class PatchSpec:
    patch_size: int = 128
    overlap_fraction: float = 0.25
    frame_count: int = 10
    frame_stride: int = 1

    def __post_init__(self):
        if self.patch_size < 1:
            raise ValueError(f"patch_size must be positive, got {self.patch_size}")
        if not 0.0 <= self.overlap_fraction < 1.0:
            raise ValueError(
                f"overlap_fraction must be in [0, 1), got {self.overlap_fraction}"
            )
        if self.frame_count < 1:
            raise ValueError(f"frame_count must be positive, got {self.frame_count}")
        if self.frame_stride < 1:
            raise ValueError(f"frame_stride must be positive, got {self.frame_stride}")


@dataclass(frozen=True)
class SourceVideo:
    """Ordered same-shaped grayscale frames plus free-form culture metadata."""

    frames: tuple
    culture_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        frames = tuple(np.asarray(f, dtype=np.float64) for f in self.frames)
        if not frames:
            raise ValueError("source video needs at least one frame")
        shape = frames[0].shape
        for k, f in enumerate(frames):
            if f.ndim != 2:
                raise DimensionError(f"frame {k} is not 2D")
            if f.shape != shape:
                raise DimensionError(f"frame {k} shape {f.shape} != {shape}")
        object.__setattr__(self, "frames", frames)
        for key, vocab in (("culture_density", DENSITY_LABELS),
                           ("cell_maturity", MATURITY_LABELS)):
            label = self.culture_meta.get(key)
            if label is not None and label not in vocab:
                raise ValueError(f"{key} must be one of {vocab}, got {label!r}")

    @property
    def height(self) -> int:
        return self.frames[0].shape[0]

    @property
    def width(self) -> int:
        return self.frames[0].shape[1]


@dataclass
class PatchSample:
    """One (K, N, N, 3) float32 sample with its provenance."""

    tensor: np.ndarray
    x: int
    y: int
    start_frame: int
    frame_stride: int
    culture: str = ""
    normalized: bool = False
    flipped_h: bool = False
    flipped_v: bool = False

    def metadata(self) -> dict:
        return {
            "culture": self.culture,
            "x": self.x,
            "y": self.y,
            "start_frame": self.start_frame,
            "frame_stride": self.frame_stride,
            "normalized": self.normalized,
            "flipped_h": self.flipped_h,
            "flipped_v": self.flipped_v,
        }


def axis_origins(extent: int, patch_size: int, overlap_fraction: float,
                 literal_step: bool = False) -> list[int]:
    """Patch origins along one axis of length ``extent``."""
    if patch_size > extent:
        raise DimensionError(f"patch size {patch_size} exceeds extent {extent}")
    if literal_step:
        stride = max(1, round(overlap_fraction * patch_size))
    else:
        stride = max(1, round((1.0 - overlap_fraction) * patch_size))
    last = extent - patch_size
    origins = list(range(0, last + 1, stride))
    if not literal_step and origins[-1] != last:
        origins.append(last)
    return origins


def patch_grid(width: int, height: int, spec: PatchSpec,
               literal_step: bool = False) -> list[tuple[int, int]]:
    """Full Cartesian grid of (x, y) patch origins, x fastest."""
    xs = axis_origins(width, spec.patch_size, spec.overlap_fraction, literal_step)
    ys = axis_origins(height, spec.patch_size, spec.overlap_fraction, literal_step)
    return [(x, y) for y in ys for x in xs]


def extract_patches(video: SourceVideo, spec: PatchSpec, start_frame: int = 0,
                    literal_step: bool = False,
                    min_variance: float | None = None) -> list[PatchSample]:
    """Crop every grid patch into a sample; channel 0 filled, flow channels zero.

    Frames are taken every ``frame_stride`` source frames starting at
    ``start_frame``.  Channel 0 is quantized to float32 on extraction, which
    is the serialized precision, so flow derived from it survives container
    round trips bit-exactly.  ``min_variance``, when set, drops patches whose
    video channel variance falls below it (empty-background filter).
    """
    k = spec.frame_count
    last_needed = start_frame + (k - 1) * spec.frame_stride
    if start_frame < 0 or last_needed >= len(video.frames):
        raise ValueError(
            f"frames {start_frame}..{last_needed} (stride {spec.frame_stride}) "
            f"not available in a {len(video.frames)}-frame video"
        )
    indices = [start_frame + i * spec.frame_stride for i in range(k)]
    stack = np.stack([video.frames[i] for i in indices]).astype(np.float32)

    n = spec.patch_size
    culture = str(video.culture_meta.get("culture", ""))
    samples = []
    for x, y in patch_grid(video.width, video.height, spec, literal_step):
        tensor = np.zeros((k, n, n, 3), dtype=np.float32)
        tensor[:, :, :, CHANNEL_VIDEO] = stack[:, y:y + n, x:x + n]
        if min_variance is not None and tensor[:, :, :, CHANNEL_VIDEO].var() < min_variance:
            continue
        samples.append(
            PatchSample(tensor=tensor, x=x, y=y, start_frame=start_frame,
                        frame_stride=spec.frame_stride, culture=culture)
        )
    return samples


def fill_flow_channels(sample: PatchSample, params: FlowParams | None = None) -> PatchSample:
    """Fill channels 1-2 with per-frame-pair flow of the video channel.

    Flow is computed on the patch crop itself in float64 and stored as
    float32.  The last frame has no successor; its flow slots stay zero.
    """
    params = params or FlowParams()
    k = sample.tensor.shape[0]
    if k < 2:
        raise ValueError(f"flow channels need at least 2 frames, got {k}")
    frames = [sample.tensor[i, :, :, CHANNEL_VIDEO].astype(np.float64) for i in range(k)]
    tensor = sample.tensor.copy()
    tensor[:, :, :, CHANNEL_FLOW_X] = 0.0
    tensor[:, :, :, CHANNEL_FLOW_Y] = 0.0
    for i, flow in enumerate(video_flow(frames, params)):
        tensor[i, :, :, CHANNEL_FLOW_X] = flow.u.astype(np.float32)
        tensor[i, :, :, CHANNEL_FLOW_Y] = flow.v.astype(np.float32)
    return replace(sample, tensor=tensor)


def normalize_per_channel(sample: PatchSample) -> PatchSample:
    """Min-max scale each channel to [0, 1] over its whole K*N*N slab.

    Channels are scaled independently so video and motion statistics do not
    mix.  A constant channel maps to all zeros.  Idempotent.
    """
    if not np.all(np.isfinite(sample.tensor)):
        raise NumericError("patch tensor contains non-finite values")
    tensor = sample.tensor.copy()
    for c in range(3):
        slab = tensor[:, :, :, c].astype(np.float64)
        lo, hi = slab.min(), slab.max()
        if hi > lo:
            tensor[:, :, :, c] = ((slab - lo) / (hi - lo)).astype(np.float32)
        else:
            tensor[:, :, :, c] = 0.0
    return replace(sample, tensor=tensor, normalized=True)


def augment(sample: PatchSample, seed: int) -> PatchSample:
    """Flip all frames horizontally and/or vertically, each with p = 0.5.

    Mirroring reverses the corresponding velocity component, so a horizontal
    flip negates channel 1 and a vertical flip negates channel 2; that keeps
    the (video, flow) pair physically consistent.  Deterministic in ``seed``.
    """
    rng = np.random.default_rng(seed)
    flip_h = bool(rng.random() < 0.5)
    flip_v = bool(rng.random() < 0.5)
    tensor = sample.tensor
    if flip_h:
        tensor = tensor[:, :, ::-1, :].copy()
        tensor[:, :, :, CHANNEL_FLOW_X] = -tensor[:, :, :, CHANNEL_FLOW_X]
    if flip_v:
        tensor = tensor[:, ::-1, :, :].copy()
        tensor[:, :, :, CHANNEL_FLOW_Y] = -tensor[:, :, :, CHANNEL_FLOW_Y]
    return replace(
        sample,
        tensor=tensor,
        flipped_h=sample.flipped_h ^ flip_h,
        flipped_v=sample.flipped_v ^ flip_v,
    )


def export_dataset(samples: list[PatchSample], out_dir) -> dict:
    """Write one CVID file per sample plus a manifest; returns a summary."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if samples:
        k, n = samples[0].tensor.shape[0], samples[0].tensor.shape[1]
        for s in samples:
            if s.tensor.shape != (k, n, n, 3):
                raise DimensionError(
                    f"inconsistent sample shape {s.tensor.shape}, expected {(k, n, n, 3)}"
                )
    records = []
    for i, s in enumerate(samples):
        name = f"patch_{i:05d}.cvid"
        write_patch_file(out_dir / name, s.tensor, s.metadata())
        records.append({"file": name, **s.metadata()})
    write_manifest(out_dir / "manifest.json", records)
    return {"count": len(records), "manifest": str(out_dir / "manifest.json")}


def _frame_from_image(img: Image.Image) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim == 3:  # RGB(A) with equal channels; keep the first
        arr = arr[:, :, 0]
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    if arr.dtype == np.uint16:
        return arr.astype(np.float64) / 65535.0
    if arr.dtype == np.int32:  # PIL mode "I" holding 16-bit data
        return arr.astype(np.float64) / 65535.0
    return np.clip(arr.astype(np.float64), 0.0, 1.0)


def load_frames_dir(directory) -> list[np.ndarray]:
    """Read the PNG frames of ``directory`` in lexicographic order as [0, 1] grids."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"not a directory: {directory}")
    paths = sorted(directory.glob("*.png"))
    if not paths:
        raise FileNotFoundError(f"no PNG frames in {directory}")
    frames = []
    for p in paths:
        with Image.open(p) as img:
            frames.append(_frame_from_image(img))
    return frames
