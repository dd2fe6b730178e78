"""
MAET workbench - Magneto-Acousto-Electric Tomography simulation and reconstruction on the unit cube
"""

from .core.base import BaseStage
from .core.enums import (
    Face,
    GradientMethod,
    IntegrationMethod,
    Parity,
    PhantomKind,
    SynthesisMethod,
)
from .core.errors import (
    GridMismatchError,
    IncompleteDataError,
    InternalConsistencyError,
    MaetError,
    ParityError,
    SingularSystemError,
    SolverConvergenceError,
    StageError,
)
from .core.fields import ScalarField3, VectorField3
from .core.io import read_field, read_vector_field, write_field, write_vector_field
from .core.measurements import MeasurementSet
from .core.models import PhantomSpec, PipelineConfig, TimeReversalConfig
from .core.store import ArtifactStore
from .stages.forward_em import Conductivity, ForwardEMStage, LeadSystem, solve_leads
from .stages.acoustic_synth import AcousticSynthStage, add_noise, synthesize
from .stages.tat_inversion import TATInversionStage, invert_measurements
from .stages.current_recovery import CurrentRecoveryStage, recover_currents
from .stages.conductivity_recovery import ConductivityRecoveryStage, recover_conductivity
from .workbench.phantoms import make_phantom
from .workbench.metrics import ReconstructionMetrics, metrics
from .workbench.exports import export_profile, export_slice
from .workbench.pipeline import PipelineResult, reconstruct, run_pipeline, save_reconstruction

__version__ = "0.1.0"
__all__ = [
    "BaseStage",
    "ArtifactStore",
    # Enums
    "Face",
    "GradientMethod",
    "IntegrationMethod",
    "Parity",
    "PhantomKind",
    "SynthesisMethod",
    # Errors
    "MaetError",
    "ParityError",
    "GridMismatchError",
    "IncompleteDataError",
    "SingularSystemError",
    "SolverConvergenceError",
    "InternalConsistencyError",
    "StageError",
    # Fields and data
    "ScalarField3",
    "VectorField3",
    "MeasurementSet",
    "read_field",
    "write_field",
    "read_vector_field",
    "write_vector_field",
    # Models
    "PhantomSpec",
    "PipelineConfig",
    "TimeReversalConfig",
    # Stages
    "Conductivity",
    "LeadSystem",
    "ForwardEMStage",
    "AcousticSynthStage",
    "TATInversionStage",
    "CurrentRecoveryStage",
    "ConductivityRecoveryStage",
    "solve_leads",
    "synthesize",
    "add_noise",
    "invert_measurements",
    "recover_currents",
    "recover_conductivity",
    # Workbench
    "make_phantom",
    "ReconstructionMetrics",
    "metrics",
    "export_slice",
    "export_profile",
    "PipelineResult",
    "reconstruct",
    "run_pipeline",
    "save_reconstruction",
]
