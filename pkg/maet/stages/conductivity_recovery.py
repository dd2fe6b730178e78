"""ln(sigma) from the currents and their curls.

With X = grad ln(sigma) every curl satisfies C^(k) = X x J^(k), which
gives three scalar equations X . (J^a x J^b) = (C^a . J^b - C^b . J^a) / 2.
They are solved pointwise by Cramer's rule, or by the truncated
two-current system where the three currents are nearly coplanar. The
divergence of X then feeds a zero-Dirichlet Poisson solve.
"""

import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy import ndimage

from ..core.base import BaseStage
from ..core.enums import TRUNCATED_PAIRS, GradientMethod
from ..core.errors import SingularSystemError
from ..core.fields import (
    CURL_PARITY,
    CURRENT_PARITY,
    ScalarField3,
    VectorField3,
    grid_coordinates,
    require_same_grid,
)
from ..core.io import read_vector_field
from ..core.models import GradientSolveReport
from ..core.spectral import divergence, poisson_dirichlet, poisson_neumann

logger = logging.getLogger(__name__)

EPS_DET = 1e-6
EPS_PAR = 1e-6


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sum(a * b, axis=-1)


def _norm(a: np.ndarray) -> np.ndarray:
    return np.sqrt(_dot(a, a))


def _cramer(a, b, c, r1, r2, r3):
    """Vectorized Cramer solution and determinant over leading axes."""
    det = _dot(a, np.cross(b, c))
    numerator = r3[..., None] * a - r2[..., None] * b + r1[..., None] * c
    with np.errstate(divide="ignore", invalid="ignore"):
        return numerator / det[..., None], det


def cramer_solve(
    a: Sequence[float],
    b: Sequence[float],
    c: Sequence[float],
    r1: float,
    r2: float,
    r3: float,
    eps: Optional[float] = None,
) -> np.ndarray:
    """X with X.(A x B) = R1, X.(A x C) = R2, X.(B x C) = R3.

    X = M (R3, -R2, R1) / det M, where M has columns A, B, C.
    """
    a, b, c = (np.asarray(v, dtype=np.float64) for v in (a, b, c))
    if eps is None:
        eps = EPS_DET * float(_norm(a) * _norm(b) * _norm(c))
    x, det = _cramer(a, b, c, np.float64(r1), np.float64(r2), np.float64(r3))
    if not abs(det) > eps:
        raise SingularSystemError(f"|det M| = {abs(det):.3e} is below the threshold {eps:.3e}")
    return x


def _full_rhs(j: Sequence[np.ndarray], c: Sequence[np.ndarray]):
    r1 = 0.5 * (_dot(c[0], j[1]) - _dot(c[1], j[0]))
    r2 = 0.5 * (_dot(c[0], j[2]) - _dot(c[2], j[0]))
    r3 = 0.5 * (_dot(c[1], j[2]) - _dot(c[2], j[1]))
    return r1, r2, r3


def gradient_full(
    j1: Sequence[float],
    j2: Sequence[float],
    j3: Sequence[float],
    c1: Sequence[float],
    c2: Sequence[float],
    c3: Sequence[float],
    eps_det: float = EPS_DET,
) -> np.ndarray:
    """grad ln(sigma) at one voxel from all three currents and curls."""
    j = [np.asarray(v, dtype=np.float64) for v in (j1, j2, j3)]
    c = [np.asarray(v, dtype=np.float64) for v in (c1, c2, c3)]
    eps = eps_det * float(_norm(j[0]) * _norm(j[1]) * _norm(j[2]))
    return cramer_solve(*j, *_full_rhs(j, c), eps=eps)


def _truncated_system(ja, jb, ca, cb):
    ab = _dot(ja, jb)
    rows = np.stack(
        [
            np.cross(ja, jb),
            ab[..., None] * ja - _dot(ja, ja)[..., None] * jb,
            ab[..., None] * jb - _dot(jb, jb)[..., None] * ja,
        ],
        axis=-2,
    )
    rhs = np.stack(
        [
            0.5 * (_dot(ca, jb) - _dot(cb, ja)),
            _dot(ca, np.cross(ja, jb)),
            _dot(cb, np.cross(jb, ja)),
        ],
        axis=-1,
    )
    return rows, rhs


def gradient_truncated(
    ja: Sequence[float],
    jb: Sequence[float],
    ca: Sequence[float],
    cb: Sequence[float],
    eps_par: float = EPS_PAR,
) -> np.ndarray:
    """grad ln(sigma) at one voxel from two non-parallel currents and their curls."""
    ja, jb, ca, cb = (np.asarray(v, dtype=np.float64) for v in (ja, jb, ca, cb))
    if not _norm(np.cross(ja, jb)) > eps_par * _norm(ja) * _norm(jb):
        raise SingularSystemError("Currents are (nearly) parallel; the voxel is skipped")
    rows, rhs = _truncated_system(ja, jb, ca, cb)
    return np.linalg.solve(rows, rhs)


def solve_gradient(
    currents: Sequence[VectorField3],
    curls: Sequence[VectorField3],
    eps_det: float = EPS_DET,
    eps_par: float = EPS_PAR,
) -> tuple[np.ndarray, GradientSolveReport]:
    """Pointwise grad ln(sigma) on the whole grid.

    Voxels pass the full three-current solve when the determinant clears
    `eps_det`; the rest use the best-conditioned current pair, or are
    skipped when every pair is parallel to within `eps_par`.

    Args:
        currents: the three lead currents J^(k).
        curls: their curls C^(k), on the same grid.
        eps_det: relative determinant threshold for the full solve.
        eps_par: relative threshold on |J^a x J^b| for the pair solves.

    Returns:
        Gradient of shape (n, n, n, 3), NaN at skipped voxels, and the
        per-voxel method report.
    """
    require_same_grid(*currents, *curls)
    j = [v.stack() for v in currents]
    c = [v.stack() for v in curls]
    n = j[0].shape[0]

    x, det = _cramer(j[0], j[1], j[2], *_full_rhs(j, c))
    norms = [_norm(v) for v in j]
    full = np.abs(det) > eps_det * norms[0] * norms[1] * norms[2]
    methods = np.where(full, GradientMethod.FULL.value, GradientMethod.SKIPPED.value)
    x[~full] = np.nan

    if not np.all(full):
        crosses = {
            method: _norm(np.cross(j[a], j[b])) for method, (a, b) in TRUNCATED_PAIRS.items()
        }
        order = list(crosses)
        best = np.argmax(np.stack([crosses[m] for m in order]), axis=0)
        for index, method in enumerate(order):
            a, b = TRUNCATED_PAIRS[method]
            usable = (
                ~full
                & (best == index)
                & (crosses[method] > eps_par * norms[a] * norms[b])
            )
            if not np.any(usable):
                continue
            rows, rhs = _truncated_system(j[a][usable], j[b][usable], c[a][usable], c[b][usable])
            x[usable] = np.linalg.solve(rows, rhs[..., None])[..., 0]
            methods[usable] = method.value
        truncated = int(np.count_nonzero((methods != GradientMethod.FULL.value)))
        logger.warning(f"{truncated} of {n**3} voxels fell back from the full solve")

    report = GradientSolveReport(methods=methods, determinants=det)
    if report.skipped:
        logger.warning(f"{report.skipped} voxels skipped (all current pairs nearly parallel)")
    return x, report


def fill_skipped(values: np.ndarray, max_passes: int = 1000) -> np.ndarray:
    """Replace NaN voxels by the mean of their valid face neighbours, repeatedly."""
    out = np.array(values)
    missing = np.isnan(out[..., 0])
    if not np.any(missing):
        return out
    if np.all(missing):
        raise SingularSystemError("Every voxel was skipped; nothing to interpolate from")
    kernel = ndimage.generate_binary_structure(3, 1).astype(np.float64)
    kernel[1, 1, 1] = 0.0
    for _ in range(max_passes):
        if not np.any(missing):
            break
        valid = (~missing).astype(np.float64)
        count = ndimage.convolve(valid, kernel, mode="constant")
        fillable = missing & (count > 0)
        for axis in range(out.shape[-1]):
            component = np.where(missing, 0.0, out[..., axis])
            total = ndimage.convolve(component, kernel, mode="constant")
            out[..., axis][fillable] = total[fillable] / count[fillable]
        missing = missing & ~fillable
    return out


def taper_weights(n: int, margin: float) -> np.ndarray:
    """Raised-cosine window: 0 within margin/2 of a face, 1 beyond margin."""
    x = grid_coordinates(n)
    d = np.minimum(x, 1.0 - x)
    if margin <= 0.0:
        w = np.ones(n)
    else:
        half = 0.5 * margin
        ramp = np.clip((d - half) / half, 0.0, 1.0)
        w = 0.5 * (1.0 - np.cos(np.pi * ramp))
    return w[:, None, None] * w[None, :, None] * w[None, None, :]


def taper_margin(gradient: np.ndarray, margin: float) -> np.ndarray:
    return gradient * taper_weights(gradient.shape[0], margin)[..., None]


def _zero_on_boundary(values: np.ndarray) -> np.ndarray:
    boundary = np.ones(values.shape, dtype=bool)
    boundary[1:-1, 1:-1, 1:-1] = False
    out = values - np.mean(values[boundary])
    out[boundary] = 0.0
    return out


def recover_log_sigma(
    gradient: Union[VectorField3, np.ndarray], taper: bool = True, margin: float = 0.1
) -> ScalarField3:
    """Solve Laplace(ln sigma) = div(gradient) with ln sigma = 0 on the boundary.

    A VectorField3 tagged with the current parity, e.g. the spectral
    gradient of an all-even field, is inverted in its own cosine basis,
    which undoes `gradient` exactly; the constant is then fixed by the
    boundary values. Anything else is read as pointwise samples and goes
    through the zero-Dirichlet sine solve.

    Args:
        gradient: grad ln(sigma) as a VectorField3 or an (n, n, n, 3) array.
        taper: fade the field to zero within `margin` of the boundary first.
        margin: width of the sigma = 1 band.

    Returns:
        ln(sigma), all-even and zero on every boundary node.

    Raises:
        ValueError: the gradient holds NaN or inf.
    """
    values = gradient.stack() if isinstance(gradient, VectorField3) else np.asarray(gradient)
    if not np.all(np.isfinite(values)):
        raise ValueError("Gradient field must be finite")
    if taper:
        values = taper_margin(values, margin)
    components = [values[..., a] for a in range(3)]
    if isinstance(gradient, VectorField3) and gradient.parity_signature == CURRENT_PARITY:
        field = VectorField3.from_arrays(components, CURRENT_PARITY, project=True)
        log_sigma = poisson_neumann(divergence(field))
        return ScalarField3(values=_zero_on_boundary(log_sigma.values))
    field = VectorField3.from_arrays(components, CURL_PARITY, project=True)
    return poisson_dirichlet(divergence(field))


def recover_conductivity(
    currents: Sequence[VectorField3],
    curls: Sequence[VectorField3],
    eps_det: float = EPS_DET,
    eps_par: float = EPS_PAR,
    taper: bool = True,
    margin: float = 0.1,
) -> tuple[ScalarField3, GradientSolveReport]:
    gradient, report = solve_gradient(currents, curls, eps_det, eps_par)
    gradient = fill_skipped(gradient)
    return recover_log_sigma(gradient, taper=taper, margin=margin), report


class ConductivityRecoveryStage(BaseStage):
    """Recovers ln(sigma) from (currents, curls)."""

    name = "conductivity_recovery"
    report: Optional[GradientSolveReport] = None

    def load_data(self, source: tuple[Sequence, Sequence]) -> tuple[list, list]:
        currents, curls = source
        load = lambda items: [  # noqa: E731
            read_vector_field(s) if isinstance(s, (str, Path)) else s for s in items
        ]
        return load(currents), load(curls)

    def transform_data(self) -> ScalarField3:
        currents, curls = self._inputs
        cfg = self.config
        log_sigma, self.report = recover_conductivity(
            currents,
            curls,
            eps_det=cfg.eps_det,
            eps_par=cfg.eps_par,
            taper=cfg.taper,
            margin=cfg.margin,
        )
        return log_sigma


__all__ = [
    "EPS_DET",
    "EPS_PAR",
    "cramer_solve",
    "gradient_full",
    "gradient_truncated",
    "solve_gradient",
    "fill_skipped",
    "taper_weights",
    "taper_margin",
    "recover_log_sigma",
    "recover_conductivity",
    "ConductivityRecoveryStage",
]
