"""Exception hierarchy shared by every stage of the toolkit."""

from typing import Optional


class MaetError(Exception):
    """Base class for all toolkit errors."""


class ParityError(MaetError, ValueError):
    """A field's parity signature does not fit the requested operation."""


class GridMismatchError(MaetError, ValueError):
    """Two fields (or a field and a dataset) live on different grids."""


class IncompleteDataError(MaetError, ValueError):
    """Measurements do not cover the time window required for inversion."""


class SingularSystemError(MaetError, ValueError):
    """A pointwise linear system is (numerically) singular."""


class SolverConvergenceError(MaetError, RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message: str, iterations: int, residual: float):
        super().__init__(f"{message} (iterations={iterations}, residual={residual:.3e})")
        self.iterations = iterations
        self.residual = residual


class InternalConsistencyError(MaetError, RuntimeError):
    """An invariant that holds by construction was found violated."""


class StageError(MaetError, RuntimeError):
    """Failure inside a pipeline stage, tagged with the stage name."""

    def __init__(self, stage: str, cause: Optional[BaseException] = None):
        detail = f"{type(cause).__name__}: {cause}" if cause is not None else "failed"
        super().__init__(f"Stage '{stage}' failed: {detail}")
        self.stage = stage
        self.cause = cause


__all__ = [
    "MaetError",
    "ParityError",
    "GridMismatchError",
    "IncompleteDataError",
    "SingularSystemError",
    "SolverConvergenceError",
    "InternalConsistencyError",
    "StageError",
]
