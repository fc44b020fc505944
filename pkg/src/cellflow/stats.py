"""Cell morphometry and two-sample comparison of measurement distributions.

Geometry is measured in pixel space and converted to microns with the
pixels-per-micron ratio (lengths divide by it, areas by its square; the
microscope calibration here is 1.1939 px/um).  Angles are reported in
degrees counterclockwise from the +x image axis with "up" at 90 degrees
(image y runs downward), after reorienting by the parent cell's long axis
so that the axis points up.

The two-sample t-test computes its two-sided p-value through the
regularized incomplete beta function, evaluated with a Lentz continued
fraction; Welch's unequal-variance form is the default, the pooled form is
available for replication.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .annotations import NeuriteTrace
from .errors import NumericError

__all__ = [
    "SIGNIFICANCE_LEVEL",
    "DEFAULT_PX_PER_MICRON",
    "DiameterEstimate",
    "MorphometrySamples",
    "GroupSamples",
    "DistributionReport",
    "polygon_area",
    "polygon_perimeter",
    "polyline_length",
    "neurite_length",
    "neurite_direction",
    "neurite_diameter",
    "aggregate_distributions",
    "two_sample_ttest",
    "regularized_incomplete_beta",
    "t_two_sided_pvalue",
    "export_report",
    "report_to_rows",
]

SIGNIFICANCE_LEVEL = 0.05
DEFAULT_PX_PER_MICRON = 1.1939
DEFAULT_CONTRAST_CUTOFF = 0.04
DEFAULT_MAX_RADIUS_PX = 20

# 8 compass rays as (dx, dy) pixel steps, y increasing downward.
COMPASS_RAYS = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))


def _check_points(points, minimum: int, what: str):
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < minimum:
        raise ValueError(f"{what} needs at least {minimum} points, got {len(pts)}")
    if not all(math.isfinite(x) and math.isfinite(y) for x, y in pts):
        raise NumericError(f"{what} contains non-finite coordinates")
    return pts


def polygon_area(polygon, px_per_micron: float = 1.0) -> float:
    """Shoelace area of a closed polygon, in square microns."""
    pts = _check_points(polygon, 3, "polygon")
    total = 0.0
    for (x1, y1), (x2, y2) in zip(pts, pts[1:] + pts[:1]):
        total += x1 * y2 - x2 * y1
    return abs(total) / 2.0 / px_per_micron**2


def polygon_perimeter(polygon, px_per_micron: float = 1.0) -> float:
    """Sum of segment lengths around a closed polygon, in microns."""
    pts = _check_points(polygon, 3, "polygon")
    total = 0.0
    for (x1, y1), (x2, y2) in zip(pts, pts[1:] + pts[:1]):
        total += math.hypot(x2 - x1, y2 - y1)
    return total / px_per_micron


def polyline_length(points, px_per_micron: float = 1.0) -> float:
    """Arc length of an open polyline, in microns."""
    pts = _check_points(points, 2, "polyline")
    total = 0.0
    for (x1, y1), (x2, y2) in zip(pts, pts[1:]):
        total += math.hypot(x2 - x1, y2 - y1)
    return total / px_per_micron


def neurite_length(trace: NeuriteTrace, px_per_micron: float = 1.0) -> float:
    """Length of one trace's own polyline; branches are measured separately."""
    return polyline_length(trace.points, px_per_micron)


def _angle_up_deg(dx: float, dy: float) -> float:
    # Counterclockwise from +x with up at 90 degrees; image y points down.
    return math.degrees(math.atan2(-dy, dx)) % 360.0


def neurite_direction(trace: NeuriteTrace, long_axis) -> float:
    """Endpoint-displacement angle in [0, 360) after long-axis reorientation.

    The parent cell's long axis is rotated to point up (90 degrees); the
    neurite's start-to-end displacement is measured in that rotated frame.
    """
    pts = _check_points(trace.points, 2, "polyline")
    (x1, y1), (x2, y2) = pts[0], pts[-1]
    dx, dy = x2 - x1, y2 - y1
    if dx == 0.0 and dy == 0.0:
        raise ValueError(f"trace {trace.id!r} has zero endpoint displacement; direction undefined")
    (ax1, ay1), (ax2, ay2) = long_axis
    adx, ady = ax2 - ax1, ay2 - ay1
    if adx == 0.0 and ady == 0.0:
        raise ValueError("long-axis endpoints coincide; orientation undefined")
    return (_angle_up_deg(dx, dy) + 90.0 - _angle_up_deg(adx, ady)) % 360.0


@dataclass(frozen=True)
class DiameterEstimate:
    """Neurite thickness probe: twice the nearest contrast-cutoff distance."""

    diameter_um: float
    radius_px: float
    trigger_points: tuple  # (x, y) pixel that tripped the cutoff, per triggered ray


def neurite_diameter(
    image: np.ndarray,
    point,
    px_per_micron: float = 1.0,
    contrast_cutoff: float = DEFAULT_CONTRAST_CUTOFF,
    max_radius: int = DEFAULT_MAX_RADIUS_PX,
) -> DiameterEstimate | None:
    """Estimate neurite thickness at ``point`` by contrast ray-casting.

    Walks the 8 compass rays outward; on each ray the first pixel whose
    relative intensity difference from the probe point reaches
    ``contrast_cutoff`` marks the local edge.  The diameter is twice the
    smallest edge distance.  Returns None when no ray finds the cutoff
    within ``max_radius`` pixels.
    """
    image = np.asarray(image, dtype=np.float64)
    x, y = int(point[0]), int(point[1])
    h, w = image.shape
    if not (0 <= x < w and 0 <= y < h):
        raise ValueError(f"probe point ({x}, {y}) outside {w}x{h} image")
    ref = image[y, x]
    denom = max(ref, 1e-12)

    best = math.inf
    triggers = []
    for dx, dy in COMPASS_RAYS:
        step_len = math.hypot(dx, dy)
        for r in range(1, max_radius + 1):
            qx, qy = x + r * dx, y + r * dy
            if not (0 <= qx < w and 0 <= qy < h):
                break
            if abs(image[qy, qx] - ref) / denom >= contrast_cutoff:
                triggers.append((qx, qy))
                best = min(best, r * step_len)
                break
    if not triggers:
        return None
    return DiameterEstimate(
        diameter_um=2.0 * best / px_per_micron,
        radius_px=best,
        trigger_points=tuple(triggers),
    )


@dataclass
class MorphometrySamples:
    """Measurement arrays pooled from annotation sets, keyed by cell label."""

    areas: dict = field(default_factory=dict)
    perimeters: dict = field(default_factory=dict)
    neurite_lengths: list = field(default_factory=list)
    neurite_directions: list = field(default_factory=list)
    direction_weights: list = field(default_factory=list)


def _walk_traces(trace: NeuriteTrace):
    yield trace
    for branch in trace.branches:
        yield from _walk_traces(branch)


def aggregate_distributions(
    annotation_sets, weight_directions_by_length: bool = False
) -> MorphometrySamples:
    """Pool per-cell areas/perimeters and per-trace lengths/directions.

    Branches count as their own entries; traces that connect two cells
    contribute twice (the joined neurite belongs to both cells).  Directions
    get unit weights unless ``weight_directions_by_length`` is set.
    """
    out = MorphometrySamples()
    for ann in annotation_sets:
        ppm = ann.px_per_micron
        for cell in ann.cells:
            out.areas.setdefault(cell.label, []).append(polygon_area(cell.polygon, ppm))
            out.perimeters.setdefault(cell.label, []).append(
                polygon_perimeter(cell.polygon, ppm)
            )
        for neurite in ann.neurites:
            parent = ann.cell_by_id(neurite.cell_id)  # raises on dangling reference
            for trace in _walk_traces(neurite):
                if trace.termination == "connected" and trace.connected_cell_id is not None:
                    ann.cell_by_id(trace.connected_cell_id)
                count = 2 if trace.termination == "connected" else 1
                length = neurite_length(trace, ppm)
                direction = neurite_direction(trace, parent.long_axis)
                weight = length if weight_directions_by_length else 1.0
                for _ in range(count):
                    out.neurite_lengths.append(length)
                    out.neurite_directions.append(direction)
                    out.direction_weights.append(weight)
    return out


# --- two-sample t-test -----------------------------------------------------

def _beta_cont_frac(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    raise NumericError(f"incomplete beta failed to converge (a={a}, b={b}, x={x})")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if not (a > 0 and b > 0):
        raise ValueError(f"shape parameters must be positive, got a={a}, b={b}")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cont_frac(a, b, x) / a
    return 1.0 - front * _beta_cont_frac(b, a, 1.0 - x) / b


def t_two_sided_pvalue(t: float, df: float) -> float:
    """P(|T_df| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2)."""
    if df <= 0:
        raise ValueError(f"degrees of freedom must be positive, got {df}")
    if t == 0.0:
        return 1.0
    if math.isinf(t):
        return 0.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


@dataclass
class GroupSamples:
    name: str
    values: np.ndarray
    units: str = ""


@dataclass
class DistributionReport:
    group_a: GroupSamples
    group_b: GroupSamples
    t_statistic: float
    degrees_freedom: float
    p_value: float
    significant: bool
    variant: str
    histogram_bins: dict


def _histogram(a: np.ndarray, b: np.ndarray, bins: int) -> dict:
    lo = float(min(a.min(), b.min()))
    hi = float(max(a.max(), b.max()))
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    counts_a, edges = np.histogram(a, bins=bins, range=(lo, hi))
    counts_b, _ = np.histogram(b, bins=bins, range=(lo, hi))
    return {
        "edges": [float(e) for e in edges],
        "counts_a": [int(c) for c in counts_a],
        "counts_b": [int(c) for c in counts_b],
    }


def two_sample_ttest(
    a,
    b,
    variant: str = "welch",
    name_a: str = "a",
    name_b: str = "b",
    units: str = "",
    bins: int = 20,
) -> DistributionReport:
    """Two-sided two-sample t-test at the 5% significance level.

    ``variant`` is "welch" (unequal variances) or "pooled".  Degenerate
    zero-variance samples follow the conventions: equal means give p = 1,
    different means give p = 0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError(f"each sample needs at least 2 values, got {a.size} and {b.size}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise NumericError("samples contain non-finite values")
    if variant not in ("welch", "pooled"):
        raise ValueError(f"variant must be 'welch' or 'pooled', got {variant!r}")

    na, nb = a.size, b.size
    mean_diff = float(a.mean() - b.mean())
    var_a = float(a.var(ddof=1))
    var_b = float(b.var(ddof=1))

    if variant == "pooled":
        df = float(na + nb - 2)
        sp2 = ((na - 1) * var_a + (nb - 1) * var_b) / df
        se = math.sqrt(sp2 * (1.0 / na + 1.0 / nb))
    else:
        sa, sb = var_a / na, var_b / nb
        se = math.sqrt(sa + sb)
        if se > 0.0:
            df = (sa + sb) ** 2 / (sa**2 / (na - 1) + sb**2 / (nb - 1))
        else:
            df = float(na + nb - 2)

    if se == 0.0:
        t = 0.0 if mean_diff == 0.0 else math.copysign(math.inf, mean_diff)
        p = 1.0 if mean_diff == 0.0 else 0.0
    else:
        t = mean_diff / se
        p = t_two_sided_pvalue(t, df)

    return DistributionReport(
        group_a=GroupSamples(name=name_a, values=a, units=units),
        group_b=GroupSamples(name=name_b, values=b, units=units),
        t_statistic=t,
        degrees_freedom=df,
        p_value=p,
        significant=p < SIGNIFICANCE_LEVEL,
        variant=variant,
        histogram_bins=_histogram(a, b, bins),
    )


# --- report export ---------------------------------------------------------

def _bootstrap_median_ci(values: np.ndarray, rng: np.random.Generator,
                         resamples: int = 10_000) -> tuple[float, float]:
    n = values.size
    medians = np.median(values[rng.integers(0, n, size=(resamples, n))], axis=1)
    lo, hi = np.percentile(medians, [2.5, 97.5])
    return float(lo), float(hi)


def _group_summary(group: GroupSamples, rng: np.random.Generator) -> dict:
    q1, med, q3 = np.percentile(group.values, [25, 50, 75])
    ci_lo, ci_hi = _bootstrap_median_ci(group.values, rng)
    return {
        "name": group.name,
        "units": group.units,
        "n": int(group.values.size),
        "median": float(med),
        "iqr": float(q3 - q1),
        "median_ci_low": ci_lo,
        "median_ci_high": ci_hi,
    }


def report_to_rows(report: DistributionReport, seed: int = 0) -> list[tuple[str, str]]:
    """Flatten a report to (key, value) rows; floats use round-trip repr."""
    rng = np.random.default_rng(seed)
    rows: list[tuple[str, str]] = []

    def emit(prefix, mapping):
        for key, val in mapping.items():
            if isinstance(val, list):
                for i, item in enumerate(val):
                    rows.append((f"{prefix}.{key}.{i}", repr(item)))
            else:
                rows.append((f"{prefix}.{key}", repr(val) if not isinstance(val, str) else val))

    emit("group_a", _group_summary(report.group_a, rng))
    emit("group_b", _group_summary(report.group_b, rng))
    emit("ttest", {
        "variant": report.variant,
        "t_statistic": report.t_statistic,
        "degrees_freedom": report.degrees_freedom,
        "p_value": report.p_value,
        "significant": report.significant,
    })
    emit("histogram", report.histogram_bins)
    return rows


def export_report(report: DistributionReport, path, fmt: str = "csv",
                  seed: int = 0) -> None:
    """Write summary statistics, test results, and histogram data.

    ``fmt`` is "csv" (key,value rows) or "json".  Bootstrap confidence
    intervals are seeded, so exports are deterministic.
    """
    path = Path(path)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["key", "value"])
        writer.writerows(report_to_rows(report, seed))
        path.write_text(buf.getvalue(), encoding="utf-8")
    elif fmt == "json":
        rng = np.random.default_rng(seed)
        doc = {
            "group_a": _group_summary(report.group_a, rng),
            "group_b": _group_summary(report.group_b, rng),
            "ttest": {
                "variant": report.variant,
                "t_statistic": report.t_statistic,
                "degrees_freedom": report.degrees_freedom,
                "p_value": report.p_value,
                "significant": report.significant,
            },
            "histogram": report.histogram_bins,
        }
        path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    else:
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")
