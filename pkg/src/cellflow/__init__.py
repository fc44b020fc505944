"""Dense optical flow, diffusion-schedule algebra, patch-video datasets,
and cell morphometry for phase-contrast microscopy videos."""

__version__ = "0.1.0"

from .annotations import AnnotationSet, CellBodyTrace, NeuriteTrace
from .diffusion import DiffusionSchedule, Latent, TrainingConfig, make_schedule, sample
from .flow import FlowField, FlowParams, compute_flow, video_flow
from .patches import PatchSample, PatchSpec, SourceVideo, extract_patches, patch_grid
from .stats import (
    DistributionReport,
    aggregate_distributions,
    polygon_area,
    polygon_perimeter,
    two_sample_ttest,
)

__all__ = [
    "__version__",
    "AnnotationSet",
    "CellBodyTrace",
    "NeuriteTrace",
    "DiffusionSchedule",
    "Latent",
    "TrainingConfig",
    "make_schedule",
    "sample",
    "FlowField",
    "FlowParams",
    "compute_flow",
    "video_flow",
    "PatchSample",
    "PatchSpec",
    "SourceVideo",
    "extract_patches",
    "patch_grid",
    "DistributionReport",
    "aggregate_distributions",
    "polygon_area",
    "polygon_perimeter",
    "two_sample_ttest",
]
