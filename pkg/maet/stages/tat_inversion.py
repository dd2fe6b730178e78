"""Recover the curls C^(k) from boundary time series by time reversal.

P = dM/dt solves the wave equation with P(x, 0) = (c / rho) h_jk(x) and
dP/dt(x, 0) = 0. Inside the cube P vanishes for t >= sqrt(3)/c, so
solving backward from a zero terminal state with the measured Dirichlet
values recovers P(x, 0).
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline
from scipy.ndimage import map_coordinates

from ..core.base import BaseStage
from ..core.enums import IntegrationMethod
from ..core.errors import GridMismatchError, IncompleteDataError
from ..core.fields import (
    CURL_PARITY,
    ScalarField3,
    VectorField3,
    curl_parity,
    grid_spacing,
    interior_mask,
    require_same_grid,
)
from ..core.measurements import MeasurementSet
from ..core.models import InversionReport, TimeReversalConfig
from ..core.spectral import derivative, inverse_transform, spectral_filter, transform

logger = logging.getLogger(__name__)


def time_differentiate(series: np.ndarray, dt: float) -> np.ndarray:
    """Fourth-order d/dt along the last axis, one-sided fourth order at both ends."""
    f = np.asarray(series, dtype=np.float64)
    n_t = f.shape[-1]
    if n_t < 5:
        raise ValueError(f"Need at least 5 time samples to differentiate, got {n_t}")
    if dt <= 0.0:
        raise ValueError(f"Time step must be positive, got {dt}")
    out = np.empty_like(f)
    out[..., 2:-2] = f[..., :-4] - 8.0 * f[..., 1:-3] + 8.0 * f[..., 3:-1] - f[..., 4:]
    out[..., 0] = (
        -25.0 * f[..., 0]
        + 48.0 * f[..., 1]
        - 36.0 * f[..., 2]
        + 16.0 * f[..., 3]
        - 3.0 * f[..., 4]
    )
    out[..., 1] = (
        -3.0 * f[..., 0] - 10.0 * f[..., 1] + 18.0 * f[..., 2] - 6.0 * f[..., 3] + f[..., 4]
    )
    out[..., -2] = (
        3.0 * f[..., -1] + 10.0 * f[..., -2] - 18.0 * f[..., -3] + 6.0 * f[..., -4] - f[..., -5]
    )
    out[..., -1] = (
        25.0 * f[..., -1]
        - 48.0 * f[..., -2]
        + 36.0 * f[..., -3]
        - 16.0 * f[..., -4]
        + 3.0 * f[..., -5]
    )
    return out / (12.0 * dt)


def resample_faces(faces: np.ndarray, n: int) -> np.ndarray:
    """Bilinear resampling of (6, m, m) face grids onto the n x n boundary nodes."""
    m = faces.shape[1]
    if m == n:
        return faces
    s = np.linspace(0.0, m - 1.0, n)
    grid = np.stack(np.meshgrid(s, s, indexing="ij")).reshape(2, -1)
    return np.stack(
        [map_coordinates(faces[face], grid, order=1).reshape(n, n) for face in range(6)]
    )


def _apply_boundary(u: np.ndarray, faces: np.ndarray) -> None:
    u[0, :, :] = faces[0]
    u[-1, :, :] = faces[1]
    u[:, 0, :] = faces[2]
    u[:, -1, :] = faces[3]
    u[:, :, 0] = faces[4]
    u[:, :, -1] = faces[5]


def _laplacian_interior(u: np.ndarray) -> np.ndarray:
    """Unscaled 7-point Laplacian on interior nodes, shape (n-2,)*3."""
    return (
        u[2:, 1:-1, 1:-1]
        + u[:-2, 1:-1, 1:-1]
        + u[1:-1, 2:, 1:-1]
        + u[1:-1, :-2, 1:-1]
        + u[1:-1, 1:-1, 2:]
        + u[1:-1, 1:-1, :-2]
        - 6.0 * u[1:-1, 1:-1, 1:-1]
    )


def time_reverse(boundary: np.ndarray, dt: float, config: TimeReversalConfig) -> ScalarField3:
    """Backward leapfrog solve driven by Dirichlet data; returns the t = 0 field.

    `boundary` holds dM/dt on the six faces, shape (6, m*m, n_t), sampled
    at t = i * dt. The result approximates (c / rho) h inside the cube
    and is zero outside [margin, 1 - margin]^3.

    Args:
        boundary: face data dM/dt, shape (6, m*m, n_t).
        dt: sample spacing of `boundary`.
        config: grid, CFL number, sound speed and face interpolation.

    Returns:
        The reconstructed field at t = 0 on the n^3 grid.

    Raises:
        IncompleteDataError: the samples stop before t = sqrt(3) / c.
        ValueError: the leapfrog step violates the CFL bound.
    """
    n = config.n
    if config.dt > config.max_stable_dt * (1 + 1e-12):
        raise ValueError(
            f"Unstable time reversal: c*dt = {config.c * config.dt:.3e} exceeds "
            f"cfl*dx/sqrt(3) = {config.c * config.max_stable_dt:.3e}"
        )
    faces = np.asarray(boundary, dtype=np.float64)
    if faces.ndim != 3 or faces.shape[0] != 6:
        raise ValueError(f"Boundary data must have shape (6, m*m, n_t), got {faces.shape}")
    m = int(round(np.sqrt(faces.shape[1])))
    if m * m != faces.shape[1]:
        raise ValueError(f"Face point count {faces.shape[1]} is not a square")
    n_t = faces.shape[2]
    times = np.arange(n_t) * dt
    terminal = config.terminal_time
    if times[-1] < terminal - 1e-9:
        raise IncompleteDataError(
            f"Data end at t = {times[-1]:.4f}, time reversal starts at T = {terminal:.4f}"
        )
    if not np.any(faces):
        return ScalarField3.zeros(n)

    spline = CubicSpline(times, faces.reshape(6 * m * m, n_t), axis=1)

    def faces_at(t: float) -> np.ndarray:
        return resample_faces(spline(t).reshape(6, m, m), n)

    steps = config.steps
    dt_s = config.dt
    coef = (config.c * dt_s / grid_spacing(n)) ** 2
    logger.debug(f"Time reversal on n={n}: {steps} steps of {dt_s:.3e}")

    u_hi = np.zeros((n, n, n))
    _apply_boundary(u_hi, faces_at(steps * dt_s))
    u_mid = np.array(u_hi)
    u_mid[1:-1, 1:-1, 1:-1] += 0.5 * coef * _laplacian_interior(u_hi)
    _apply_boundary(u_mid, faces_at((steps - 1) * dt_s))
    for s in range(steps - 1, 0, -1):
        u_lo = np.empty_like(u_mid)
        u_lo[1:-1, 1:-1, 1:-1] = (
            2.0 * u_mid[1:-1, 1:-1, 1:-1]
            - u_hi[1:-1, 1:-1, 1:-1]
            + coef * _laplacian_interior(u_mid)
        )
        _apply_boundary(u_lo, faces_at((s - 1) * dt_s))
        u_hi, u_mid = u_mid, u_lo

    return ScalarField3(values=u_mid * interior_mask(n, config.margin))


def assemble_curl(
    h_1k: ScalarField3,
    h_2k: ScalarField3,
    h_3k: ScalarField3,
    rho: float = 1.0,
    b_magnitude: float = 1.0,
    c: float = 1.0,
) -> VectorField3:
    """C^(k) = rho / (c |B|) * (P_1k, P_2k, P_3k)(t = 0), projected onto curl parity."""
    require_same_grid(h_1k, h_2k, h_3k)
    scale = rho / (c * b_magnitude)
    return VectorField3.from_arrays(
        [scale * h.values for h in (h_1k, h_2k, h_3k)], CURL_PARITY, project=True
    )


def complete_curl_two_directions(
    c1: ScalarField3,
    c2: ScalarField3,
    method: IntegrationMethod = IntegrationMethod.SPECTRAL,
) -> ScalarField3:
    """Third curl component from the first two.

    Integrates dC3/dx3 = -(dC1/dx1 + dC2/dx2) from x3 = 0.
    """
    n = require_same_grid(c1, c2)
    c1 = ScalarField3.project(c1.values, curl_parity(0))
    c2 = ScalarField3.project(c2.values, curl_parity(1))
    rate = derivative(c1, 0) + derivative(c2, 1)
    target = curl_parity(2)
    if IntegrationMethod(method) is IntegrationMethod.TRAPEZOID:
        x3 = np.linspace(0.0, 1.0, n)
        values = -cumulative_trapezoid(rate.values, x3, axis=2, initial=0.0)
        return ScalarField3.project(values, target)
    # Antiderivative of -sin(pi k x) vanishing at x = 0 is (cos(pi k x) - 1) / (pi k).
    coeffs = transform(rate)
    k = np.pi * np.arange(n, dtype=np.float64)
    k[0] = 1.0
    integrated = coeffs / k[None, None, :]
    integrated[:, :, 0] = 0.0
    integrated[:, :, 0] = -np.sum(integrated, axis=2)
    return inverse_transform(integrated, target, n)


def invert_family(
    data: MeasurementSet, k: int, j: int, config: TimeReversalConfig
) -> ScalarField3:
    """Time-reversed P_jk(t = 0) for one functional family."""
    if data.metadata.n != config.n:
        raise GridMismatchError(
            f"Measurements were taken for n={data.metadata.n}, inversion grid is n={config.n}"
        )
    rate = time_differentiate(data.family(k, j), data.dt)
    return time_reverse(rate, data.dt, config)


def invert_measurements(
    data: MeasurementSet,
    config: TimeReversalConfig,
    directions: Sequence[int] = (1, 2, 3),
    integration: IntegrationMethod = IntegrationMethod.SPECTRAL,
    max_workers: int = 1,
    filter_cutoff: Optional[float] = None,
) -> tuple[list[VectorField3], InversionReport]:
    """Curls C^(1..3) from a measurement set.

    With directions (1, 2) the third component of each curl is completed
    from the first two. A `filter_cutoff` low-passes every reconstructed
    component before completion.

    Args:
        data: the nine (or six) measured families.
        config: time-reversal settings; `config.n` must match the data.
        directions: field directions measured, (1, 2, 3) or (1, 2).
        integration: how the third component is completed for two directions.
        max_workers: threads used across families.
        filter_cutoff: optional low-pass cutoff as a fraction of the top mode.

    Returns:
        The three curls in curl parity, and the per-component energies.

    Raises:
        ValueError: `directions` is neither (1, 2, 3) nor (1, 2).
        GridMismatchError: the data were taken for another grid.
    """
    directions = tuple(directions)
    if directions not in ((1, 2, 3), (1, 2)):
        raise ValueError(f"Field directions must be (1, 2, 3) or (1, 2), got {directions}")
    meta = data.metadata
    pairs = [(k, j) for k in (1, 2, 3) for j in directions]

    def run(pair: tuple[int, int]) -> ScalarField3:
        return invert_family(data, pair[0], pair[1], config)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            fields = dict(zip(pairs, pool.map(run, pairs)))
    else:
        fields = {pair: run(pair) for pair in pairs}

    curls = []
    energies = {}
    for k in (1, 2, 3):
        parts = [fields.get((k, j)) for j in (1, 2, 3)]
        if parts[2] is None:
            parts[2] = ScalarField3.zeros(config.n)
        c = assemble_curl(*parts, rho=meta.rho, b_magnitude=meta.b_magnitude, c=meta.c)
        if filter_cutoff is not None:
            c = VectorField3.from_components([spectral_filter(p, filter_cutoff) for p in c])
        if len(directions) == 2:
            c3 = complete_curl_two_directions(c[0], c[1], integration)
            c = VectorField3.from_components([c[0], c[1], c3])
        for j, component in enumerate(c, start=1):
            energies[f"k{k}_j{j}"] = component.norm()
        curls.append(c)
    report = InversionReport(
        n=config.n,
        n_steps=config.steps,
        dt_solver=config.dt,
        margin=config.margin,
        energies=energies,
        two_directions=len(directions) == 2,
    )
    return curls, report


class TATInversionStage(BaseStage):
    """Turns a measurement set into the three reconstructed curls."""

    name = "tat_inversion"
    report: Optional[InversionReport] = None

    def load_data(self, source: Union[MeasurementSet, str, Path]) -> MeasurementSet:
        if isinstance(source, (str, Path)):
            return MeasurementSet.load(source)
        if isinstance(source, MeasurementSet):
            return source
        raise TypeError(f"Unsupported tat_inversion input: {type(source).__name__}")

    def transform_data(self) -> list[VectorField3]:
        cfg = self.config
        directions = (1, 2) if cfg.two_directions else (1, 2, 3)
        curls, self.report = invert_measurements(
            self._inputs,
            cfg.time_reversal(),
            directions=directions,
            integration=cfg.integration,
            max_workers=cfg.max_workers,
            filter_cutoff=cfg.filter_cutoff,
        )
        return curls


__all__ = [
    "time_differentiate",
    "resample_faces",
    "time_reverse",
    "assemble_curl",
    "complete_curl_two_directions",
    "invert_family",
    "invert_measurements",
    "TATInversionStage",
]
