from .forward_em import ForwardEMStage
from .acoustic_synth import AcousticSynthStage
from .tat_inversion import TATInversionStage
from .current_recovery import CurrentRecoveryStage
from .conductivity_recovery import ConductivityRecoveryStage

__all__ = [
    "ForwardEMStage",
    "AcousticSynthStage",
    "TATInversionStage",
    "CurrentRecoveryStage",
    "ConductivityRecoveryStage",
]
