"""Currents from their curls through the mixed sine/cosine series.

Since div J = 0, curl curl J = -Laplace(J), so J0 = J - e_k solves
Laplace(J0) = -curl(C) componentwise. In the current-parity basis every
component has zero normal value on its own faces, which is exactly the
boundary condition J . n = 2 I_k once e_k is added back.
"""

import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from ..core.base import BaseStage
from ..core.enums import Face
from ..core.errors import ParityError
from ..core.fields import CURL_PARITY, CURRENT_PARITY, GENERIC_PARITY, VectorField3
from ..core.io import read_vector_field
from ..core.models import CurrentRecoveryReport
from ..core.spectral import curl, divergence, leray_project, poisson_mixed
from .forward_em import LEAD_FLUX_SCALE, boundary_current

logger = logging.getLogger(__name__)


def recover_current_deviation(c: VectorField3, project: bool = True) -> VectorField3:
    """J0 with curl(J0) = C, div(J0) = 0, in current parity."""
    if c.parity_signature != CURL_PARITY:
        raise ParityError(
            "recover_current needs curl parity (component a even on axis a, odd elsewhere)"
        )
    if project:
        c = leray_project(c)
    return poisson_mixed(-curl(c))


def recover_current(c: VectorField3, k: int, project: bool = True) -> VectorField3:
    """Full current J^(k) = J0 + e_k, with no parity tag.

    Args:
        c: reconstructed curl of lead k, in curl parity.
        k: lead index, 1 to 3.
        project: remove the divergence of `c` before inverting it.

    Returns:
        J^(k) on the same grid.

    Raises:
        ParityError: `c` is not tagged with the curl parity.
        ValueError: k is outside 1..3.
    """
    boundary_current(k)  # rejects k outside 1..3
    deviation = recover_current_deviation(c, project)
    arrays = [comp.values.copy() for comp in deviation]
    arrays[k - 1] += 1.0
    return VectorField3.from_arrays(arrays, GENERIC_PARITY)


def boundary_flux_residual(current: VectorField3, k: int) -> float:
    """Max deviation of J . n from the injected normal current over all faces."""
    pattern = boundary_current(k)
    worst = 0.0
    for face in Face:
        normal = current[face.axis].values
        index = [slice(None)] * 3
        index[face.axis] = -1 if face.side else 0
        plane = normal[tuple(index)]
        outward = plane if face.side else -plane
        worst = max(worst, float(np.max(np.abs(outward - LEAD_FLUX_SCALE * pattern.flux(face)))))
    return worst


def divergence_residual(current: VectorField3, k: int) -> float:
    """Relative L2 norm of div(J0)."""
    arrays = [comp.values - (1.0 if axis == k - 1 else 0.0) for axis, comp in enumerate(current)]
    deviation = VectorField3.from_arrays(arrays, CURRENT_PARITY, project=True)
    scale = max(current.norm(), 1e-300)
    return divergence(deviation).norm() / scale


def recover_currents(
    curls: Sequence[VectorField3], project: bool = True
) -> tuple[list[VectorField3], list[CurrentRecoveryReport]]:
    currents, reports = [], []
    for k, c in enumerate(curls, start=1):
        current = recover_current(c, k, project)
        report = CurrentRecoveryReport(
            k=k,
            boundary_flux_residual=boundary_flux_residual(current, k),
            divergence_residual=divergence_residual(current, k),
        )
        logger.debug(
            f"Current k={k}: flux residual {report.boundary_flux_residual:.2e}, "
            f"divergence residual {report.divergence_residual:.2e}"
        )
        currents.append(current)
        reports.append(report)
    return currents, reports


class CurrentRecoveryStage(BaseStage):
    """Recovers J^(1..3) from the reconstructed curls."""

    name = "current_recovery"
    reports: Optional[list[CurrentRecoveryReport]] = None

    def load_data(self, source: Sequence[Union[VectorField3, str, Path]]) -> list[VectorField3]:
        curls = [read_vector_field(s) if isinstance(s, (str, Path)) else s for s in source]
        if len(curls) != 3:
            raise ValueError(f"Need three curls, got {len(curls)}")
        return curls

    def transform_data(self) -> list[VectorField3]:
        currents, self.reports = recover_currents(self._inputs)
        return currents


__all__ = [
    "recover_current_deviation",
    "recover_current",
    "boundary_flux_residual",
    "divergence_residual",
    "recover_currents",
    "CurrentRecoveryStage",
]
