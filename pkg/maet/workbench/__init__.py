"""Phantoms, end-to-end runs, error metrics and figure exports."""

from .phantoms import make_phantom
from .metrics import ReconstructionMetrics, metrics
from .exports import LineSpec, PlaneSpec, export_profile, export_slice
from .pipeline import PipelineResult, reconstruct, run_pipeline, save_reconstruction

__all__ = [
    "make_phantom",
    "ReconstructionMetrics",
    "metrics",
    "LineSpec",
    "PlaneSpec",
    "export_profile",
    "export_slice",
    "PipelineResult",
    "reconstruct",
    "run_pipeline",
    "save_reconstruction",
]
