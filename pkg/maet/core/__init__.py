"""Core components of the MAET workbench."""

from .base import BaseStage
from .fields import ScalarField3, VectorField3
from .measurements import MeasurementSet
from .store import ArtifactStore

__all__ = [
    "BaseStage",
    "ScalarField3",
    "VectorField3",
    "MeasurementSet",
    "ArtifactStore",
]
