"""Horn-Schunck dense optical flow for grayscale video.

The classic iterative scheme trades brightness constancy against
smoothness: each round replaces the velocity fields with their 4-neighbor
local averages corrected by the brightness-constancy residual, starting
from zero fields.

Conventions, fixed here because the update equations are sign-sensitive:

* Frames are 2D arrays indexed ``[row, col]``; x runs along columns,
  y along rows.
* Spatial gradients use the unnormalized 3x3 Sobel pair, signed so that an
  intensity increase toward larger column index gives positive ``ix`` and an
  increase toward larger row index gives positive ``iy``.
* The temporal derivative is ``current - next`` (not the more common
  ``next - current``).  Under that sign, ``u`` is positive where the second
  frame equals the first sampled one pixel to the right
  (``next[i, j] == current[i, j+1]``), and symmetrically for ``v``.
* Borders are handled by replicate padding, which keeps gradients zero on
  constant images and therefore keeps zero-motion input at exactly zero flow.

All arithmetic is float64; callers that serialize downcast to float32.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericError

__all__ = [
    "FlowParams",
    "GradientTriplet",
    "FlowField",
    "as_gray_frame",
    "sobel_gradients",
    "temporal_derivative",
    "local_average",
    "hs_step",
    "compute_flow",
    "video_flow",
]


@dataclass(frozen=True)
class FlowParams:
    """Solver parameters: brightness-constancy weight and round count."""

    brightness_weight: float = 1.0
    iterations: int = 10

    def __post_init__(self):
        if not self.brightness_weight > 0:
            raise ValueError(f"brightness_weight must be > 0, got {self.brightness_weight}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")


@dataclass(frozen=True)
class GradientTriplet:
    """Per-pixel x, y and temporal derivatives of a frame pair."""

    ix: np.ndarray
    iy: np.ndarray
    it: np.ndarray

    def __post_init__(self):
        if not (self.ix.shape == self.iy.shape == self.it.shape):
            raise DimensionError(
                f"gradient shapes differ: {self.ix.shape}, {self.iy.shape}, {self.it.shape}"
            )


@dataclass(frozen=True)
class FlowField:
    """Dense per-pixel velocities in pixels/frame (u along x, v along y)."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        if self.u.shape != self.v.shape:
            raise DimensionError(f"u shape {self.u.shape} != v shape {self.v.shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape


def as_gray_frame(values) -> np.ndarray:
    """Validate and return a grayscale frame as a float64 array.

    Frames must be 2D, non-empty, finite, and scaled to [0, 1].
    """
    frame = np.asarray(values, dtype=np.float64)
    if frame.ndim != 2 or frame.shape[0] < 1 or frame.shape[1] < 1:
        raise DimensionError(f"frame must be a non-empty 2D array, got shape {frame.shape}")
    if not np.all(np.isfinite(frame)):
        raise NumericError("frame contains non-finite values")
    if frame.min() < 0.0 or frame.max() > 1.0:
        raise ValueError("frame intensities must lie in [0, 1]")
    return frame


def _replicate_pad(a: np.ndarray) -> np.ndarray:
    return np.pad(a, 1, mode="edge")


def sobel_gradients(frame: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """3x3 Sobel x- and y-gradients with replicate-padded borders.

    Returns ``(ix, iy)`` of the same shape as ``frame``.  Kernels are the
    standard unnormalized pair, so a linear ramp of step d per pixel maps to
    a gradient of 8*d in the ramp direction.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 2 or frame.shape[0] < 3 or frame.shape[1] < 3:
        raise DimensionError(f"Sobel gradients need a frame of at least 3x3, got {frame.shape}")
    p = _replicate_pad(frame)
    # Correlation with [[-1,0,1],[-2,0,2],[-1,0,1]]: right column minus left,
    # grouped so constant images and axis-aligned ramps cancel exactly.
    ix = (p[:-2, 2:] + 2.0 * p[1:-1, 2:] + p[2:, 2:]) - (
        p[:-2, :-2] + 2.0 * p[1:-1, :-2] + p[2:, :-2]
    )
    # Transposed kernel: bottom row minus top.
    iy = (p[2:, :-2] + 2.0 * p[2:, 1:-1] + p[2:, 2:]) - (
        p[:-2, :-2] + 2.0 * p[:-2, 1:-1] + p[:-2, 2:]
    )
    return ix, iy


def temporal_derivative(current: np.ndarray, next_frame: np.ndarray) -> np.ndarray:
    """Forward-difference temporal derivative: ``current - next_frame``."""
    current = np.asarray(current, dtype=np.float64)
    next_frame = np.asarray(next_frame, dtype=np.float64)
    if current.shape != next_frame.shape:
        raise DimensionError(
            f"frame shapes differ: {current.shape} vs {next_frame.shape}"
        )
    return current - next_frame


def local_average(field: np.ndarray) -> np.ndarray:
    """4-neighbor mean of each pixel, replicate-padded at the borders."""
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 2 or field.shape[0] < 3 or field.shape[1] < 3:
        raise DimensionError(f"local average needs a field of at least 3x3, got {field.shape}")
    p = _replicate_pad(field)
    return 0.25 * (p[2:, 1:-1] + p[:-2, 1:-1] + p[1:-1, 2:] + p[1:-1, :-2])


def hs_step(
    ubar: np.ndarray,
    vbar: np.ndarray,
    grads: GradientTriplet,
    brightness_weight: float,
) -> FlowField:
    """One flow update from local averages and gradients.

    Computes, elementwise,

        u = ubar - [(ix*ubar + iy*vbar + it) / (1/w + ix^2 + iy^2)] * ix
        v = vbar - [(ix*ubar + iy*vbar + it) / (1/w + ix^2 + iy^2)] * iy

    where ``w`` is the brightness-constancy weight.  The denominator is at
    least ``1/w > 0``, so the division is always defined.
    """
    ubar = np.asarray(ubar, dtype=np.float64)
    vbar = np.asarray(vbar, dtype=np.float64)
    if not (ubar.shape == vbar.shape == grads.ix.shape):
        raise DimensionError(
            f"shape mismatch: ubar {ubar.shape}, vbar {vbar.shape}, gradients {grads.ix.shape}"
        )
    if not brightness_weight > 0:
        raise ValueError(f"brightness_weight must be > 0, got {brightness_weight}")
    for name, arr in (("ubar", ubar), ("vbar", vbar), ("ix", grads.ix),
                      ("iy", grads.iy), ("it", grads.it)):
        if not np.all(np.isfinite(arr)):
            raise NumericError(f"non-finite values in {name}")

    residual = grads.ix * ubar + grads.iy * vbar + grads.it
    denom = 1.0 / brightness_weight + grads.ix * grads.ix + grads.iy * grads.iy
    scale = residual / denom
    return FlowField(u=ubar - scale * grads.ix, v=vbar - scale * grads.iy)


def compute_flow(current: np.ndarray, next_frame: np.ndarray, params: FlowParams) -> FlowField:
    """Dense flow between two frames.

    Gradients are taken once from ``current`` (spatial) and the frame pair
    (temporal); the velocity fields then start at zero and are refined for
    ``params.iterations`` rounds of update-then-local-average (Jacobi style:
    each round's averages come from the fields the previous round produced).
    """
    current = as_gray_frame(current)
    next_frame = as_gray_frame(next_frame)
    if current.shape != next_frame.shape:
        raise DimensionError(
            f"frame shapes differ: {current.shape} vs {next_frame.shape}"
        )
    if current.shape[0] < 3 or current.shape[1] < 3:
        raise DimensionError(f"flow needs frames of at least 3x3, got {current.shape}")

    ix, iy = sobel_gradients(current)
    grads = GradientTriplet(ix=ix, iy=iy, it=temporal_derivative(current, next_frame))

    ubar = np.zeros_like(current)
    vbar = np.zeros_like(current)
    flow = FlowField(u=ubar, v=vbar)
    for _ in range(params.iterations):
        flow = hs_step(ubar, vbar, grads, params.brightness_weight)
        ubar = local_average(flow.u)
        vbar = local_average(flow.v)
    return flow


def video_flow(frames, params: FlowParams) -> list[FlowField]:
    """Flow fields for every consecutive frame pair, in frame order.

    ``frames`` is a sequence of K >= 2 same-shaped grayscale frames; the
    result holds K-1 fields, the k-th describing the pair (k, k+1).
    """
    frames = list(frames)
    if len(frames) < 2:
        raise ValueError(f"video flow needs at least 2 frames, got {len(frames)}")
    return [
        compute_flow(frames[k], frames[k + 1], params)
        for k in range(len(frames) - 1)
    ]
