"""Boundary time series of the regular measuring functionals.

For lead k and field direction j the datum at a boundary point y is
M(y, t) = (c t / rho) * mean of h_jk over the sphere |x - y| = c t, with
h_jk = |B| * (C^(k))_j extended by zero outside the cube. Two backends
compute it: a k-space propagator on a zero-padded periodic grid (exact
for the grid's trigonometric interpolant) and direct sphere quadrature.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy import fft as sfft
from scipy.ndimage import map_coordinates

from ..core.base import BaseStage
from ..core.enums import Face, SynthesisMethod
from ..core.errors import GridMismatchError, IncompleteDataError
from ..core.fields import (
    ScalarField3,
    VectorField3,
    grid_coordinates,
    grid_spacing,
    require_same_grid,
)
from ..core.io import read_vector_field
from ..core.measurements import MeasurementSet, series_file_name
from ..core.models import (
    SQRT3,
    AcquisitionMetadata,
    NoiseRecord,
    covers_diameter,
    default_dt,
    default_n_t,
)
from ..core.spectral import fft_workers
from .forward_em import LeadSystem

logger = logging.getLogger(__name__)

Point = Union[Sequence[float], np.ndarray]


def face_points(m: int, face: Face) -> np.ndarray:
    """Coordinates (m*m, 3) of the face grid, row-major over the tangential axes."""
    face = Face(face)
    s = np.linspace(0.0, 1.0, m)
    a, b = face.tangential_axes
    points = np.empty((m, m, 3))
    points[..., face.axis] = float(face.side)
    points[..., a] = s[:, None]
    points[..., b] = s[None, :]
    return points.reshape(m * m, 3)


def fibonacci_sphere(count: int) -> np.ndarray:
    """`count` nearly uniform unit vectors on a golden-angle spiral."""
    if count < 1:
        raise ValueError(f"Need at least one sphere point, got {count}")
    i = np.arange(count) + 0.5
    z = 1.0 - 2.0 * i / count
    rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = np.pi * (3.0 - math.sqrt(5.0)) * i
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def sphere_point_count(radius: float, n: int, oversampling: float = 4.0) -> int:
    return max(1, math.ceil(4.0 * math.pi * (radius / grid_spacing(n)) ** 2 * oversampling))


def spherical_mean(
    h: ScalarField3, center: Point, radius: float, oversampling: float = 4.0
) -> float:
    """Mean of h (zero outside the cube) over the sphere |x - center| = radius."""
    if radius <= 0.0:
        raise ValueError(f"Sphere radius must be positive, got {radius}")
    center = np.asarray(center, dtype=np.float64)
    directions = fibonacci_sphere(sphere_point_count(radius, h.n, oversampling))
    points = center + radius * directions
    coords = points.T * (h.n - 1)
    samples = map_coordinates(h.values, coords, order=1, mode="constant", cval=0.0)
    return float(np.mean(samples))


def gaussian_spherical_mean(
    source_center: Point, width: float, center: Point, radius: float, amplitude: float = 1.0
) -> float:
    """Closed-form sphere mean of amplitude * exp(-|x - source_center|^2 / (2 width^2))."""
    d = float(np.linalg.norm(np.asarray(center, float) - np.asarray(source_center, float)))
    s2 = 2.0 * width * width
    if radius == 0.0:
        return amplitude * math.exp(-d * d / s2)
    if d < 1e-12:
        return amplitude * math.exp(-radius * radius / s2)
    return (
        amplitude
        * width
        * width
        / (2.0 * radius * d)
        * (math.exp(-((d - radius) ** 2) / s2) - math.exp(-((d + radius) ** 2) / s2))
    )


def gaussian_source_series(
    source_center: Point,
    width: float,
    metadata: AcquisitionMetadata,
    amplitude: float = 1.0,
) -> np.ndarray:
    """Series (6, m*m, n_t) of a Gaussian source, not restricted to the cube."""
    times = metadata.times
    out = np.zeros((6, metadata.m**2, metadata.n_t))
    for face in Face:
        for p, y in enumerate(face_points(metadata.m, face)):
            for i, t in enumerate(times[1:], start=1):
                r = metadata.c * t
                mean = gaussian_spherical_mean(source_center, width, y, r, amplitude)
                out[face.value, p, i] = r / metadata.rho * mean
    return out


def _extract_faces(volume: np.ndarray, m: int) -> np.ndarray:
    """Face values (6, m*m) of an (n, n, n) volume, bilinear when m != n."""
    n = volume.shape[0]
    planes = [
        volume[0, :, :],
        volume[-1, :, :],
        volume[:, 0, :],
        volume[:, -1, :],
        volume[:, :, 0],
        volume[:, :, -1],
    ]
    if m == n:
        return np.stack([p.reshape(-1) for p in planes])
    s = np.linspace(0.0, n - 1.0, m)
    grid = np.stack(np.meshgrid(s, s, indexing="ij")).reshape(2, -1)
    return np.stack([map_coordinates(p, grid, order=1) for p in planes])


def padded_size(n: int) -> int:
    """Periodic grid long enough that no sphere of radius sqrt(3) sees a wrapped copy."""
    return sfft.next_fast_len(math.ceil((1.0 + SQRT3) * (n - 1)) + 2, real=True)


class KSpacePropagator:
    """Exact propagator sin(|xi| c t) / (rho |xi|) on a zero-padded grid."""

    def __init__(self, n: int, c: float = 1.0, rho: float = 1.0):
        self.n = n
        self.c = c
        self.rho = rho
        self.size = padded_size(n)
        h = grid_spacing(n)
        k = 2.0 * np.pi * sfft.fftfreq(self.size, d=h)
        kr = 2.0 * np.pi * sfft.rfftfreq(self.size, d=h)
        self.wavenumber = np.sqrt(
            k[:, None, None] ** 2 + k[None, :, None] ** 2 + kr[None, None, :] ** 2
        )

    def spectrum(self, values: np.ndarray) -> np.ndarray:
        padded = np.zeros((self.size,) * 3)
        padded[: self.n, : self.n, : self.n] = values
        return sfft.rfftn(padded, workers=fft_workers())

    def evaluate(self, spectrum: np.ndarray, t: float) -> np.ndarray:
        """M(x, t) on the original n^3 grid."""
        ct = self.c * t
        # sin(ct |xi|) / |xi| written with np.sinc so that xi = 0 is regular
        multiplier = ct / self.rho * np.sinc(ct * self.wavenumber / np.pi)
        volume = sfft.irfftn(spectrum * multiplier, s=(self.size,) * 3, workers=fft_workers())
        return volume[: self.n, : self.n, : self.n]

    def face_series(self, values: np.ndarray, times: np.ndarray, m: int) -> np.ndarray:
        spectrum = self.spectrum(values)
        out = np.zeros((6, m * m, len(times)))
        for i, t in enumerate(times):
            if t == 0.0:
                continue
            out[:, :, i] = _extract_faces(self.evaluate(spectrum, t), m)
        return out


def _support_box(values: np.ndarray) -> Optional[tuple[np.ndarray, np.ndarray]]:
    nonzero = np.argwhere(values != 0.0)
    if nonzero.size == 0:
        return None
    h = grid_spacing(values.shape[0])
    return (nonzero.min(axis=0) - 1) * h, (nonzero.max(axis=0) + 1) * h


def quadrature_series(
    h: ScalarField3, metadata: AcquisitionMetadata, oversampling: float = 4.0
) -> np.ndarray:
    """Series (6, m*m, n_t) by sphere quadrature, skipping spheres that miss supp(h)."""
    out = np.zeros((6, metadata.m**2, metadata.n_t))
    box = _support_box(h.values)
    if box is None:
        return out
    lo, hi = box
    for face in Face:
        for p, y in enumerate(face_points(metadata.m, face)):
            nearest = float(np.linalg.norm(np.clip(y, lo, hi) - y))
            farthest = float(np.linalg.norm(np.maximum(np.abs(y - lo), np.abs(y - hi))))
            for i, t in enumerate(metadata.times):
                r = metadata.c * t
                if r == 0.0 or r < nearest or r > farthest:
                    continue
                out[face.value, p, i] = r / metadata.rho * spherical_mean(h, y, r, oversampling)
    return out


def default_acquisition(
    n: int, c: float = 1.0, rho: float = 1.0, b_magnitude: float = 1.0
) -> AcquisitionMetadata:
    """m = n face sources, dt = dx/2 and enough samples to reach t = sqrt(3)/c."""
    dt = default_dt(n)
    return AcquisitionMetadata(
        n=n, m=n, n_t=default_n_t(dt, c), dt=dt, c=c, rho=rho, b_magnitude=b_magnitude
    )


def synthesize(
    lead: Union[LeadSystem, Sequence[VectorField3]],
    rho: float = 1.0,
    b_magnitude: float = 1.0,
    m: Optional[int] = None,
    n_t: Optional[int] = None,
    dt: Optional[float] = None,
    c: float = 1.0,
    method: SynthesisMethod = SynthesisMethod.SPECTRAL,
    oversampling: float = 4.0,
    max_workers: int = 1,
) -> MeasurementSet:
    """Measurement set of the nine families (k, j) for the curls of `lead`.

    Args:
        lead: a LeadSystem, or its three curl fields in lead order.
        rho: density; the series scale as 1 / rho.
        b_magnitude: field strength multiplying every source.
        m: face sensors per axis, n when omitted.
        n_t: time samples, enough to cover the diameter when omitted.
        dt: sample spacing, half a grid cell when omitted.
        c: sound speed.
        method: k-space propagation or direct sphere quadrature.
        oversampling: sphere points per grid cell for the quadrature backend.
        max_workers: threads used across the nine families.

    Returns:
        A MeasurementSet with series of shape (3, 3, 6, m*m, n_t).

    Raises:
        GridMismatchError: the curls differ in size or m exceeds n.
        IncompleteDataError: the time window is shorter than the diameter.
    """
    curls = list(lead.curls) if isinstance(lead, LeadSystem) else list(lead)
    if len(curls) != 3:
        raise ValueError(f"Need three curls, got {len(curls)}")
    n = require_same_grid(*curls)
    m = n if m is None else m
    dt = default_dt(n) if dt is None else dt
    n_t = default_n_t(dt, c) if n_t is None else n_t
    if m > n:
        raise GridMismatchError(f"Face grid m={m} exceeds volume grid n={n}")
    if not covers_diameter(n_t, dt, c):
        raise IncompleteDataError(
            f"(n_t - 1) * dt * c = {(n_t - 1) * dt * c:.4f} is below sqrt(3)"
        )
    metadata = AcquisitionMetadata(
        n=n, m=m, n_t=n_t, dt=dt, c=c, rho=rho, b_magnitude=b_magnitude
    )
    method = SynthesisMethod(method)
    propagator = KSpacePropagator(n, c, rho) if method is SynthesisMethod.SPECTRAL else None

    def family(pair: tuple[int, int]) -> np.ndarray:
        k, j = pair
        h = b_magnitude * curls[k - 1][j - 1].values
        if not np.any(h):
            return np.zeros((6, m * m, n_t))
        logger.debug(f"Synthesizing family (k={k}, j={j}) with {method.value} backend")
        if propagator is not None:
            return propagator.face_series(h, metadata.times, m)
        return quadrature_series(ScalarField3(values=h), metadata, oversampling)

    pairs = [(k, j) for k in (1, 2, 3) for j in (1, 2, 3)]
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            families = list(pool.map(family, pairs))
    else:
        families = [family(pair) for pair in pairs]
    series = np.stack(families).reshape(3, 3, 6, m * m, n_t)
    logger.info(f"Synthesized 9 families on m={m} face grids with n_t={n_t}")
    return MeasurementSet(series=series, metadata=metadata)


def add_noise(data: MeasurementSet, level: float, seed: int) -> MeasurementSet:
    """Add uniform noise scaled per series to `level` times the series' L2 norm.

    Series number i (in storage order) draws from its own generator seeded
    with (seed, i).

    Args:
        data: clean measurements.
        level: noise L2 norm relative to each series, 1.0 for 100%.
        seed: base seed, recorded in the metadata.

    Returns:
        A new MeasurementSet; all-zero series stay zero.
    """
    if level < 0.0:
        raise ValueError(f"Noise level must be non-negative, got {level}")
    metadata = data.metadata.model_copy(update={"noise": NoiseRecord(level=level, seed=seed)})
    if level == 0.0:
        return data.with_series(data.series, metadata)
    flat = data.series.reshape(-1, data.n_t)
    noisy = np.array(flat)
    norms = np.linalg.norm(flat, axis=1)
    for index in np.flatnonzero(norms > 0.0):
        rng = np.random.default_rng([seed, int(index)])
        noise = rng.uniform(-1.0, 1.0, data.n_t)
        noisy[index] += noise * (level * norms[index] / np.linalg.norm(noise))
    logger.info(f"Added {level:.0%} noise (seed {seed}) to {np.count_nonzero(norms)} series")
    return data.with_series(noisy.reshape(data.series.shape), metadata)


class AcousticSynthStage(BaseStage):
    """Synthesizes (and optionally perturbs) the measurement set of a lead system."""

    name = "acoustic_synth"
    clean: Optional[MeasurementSet] = None

    def load_data(self, source):
        """A LeadSystem, three curls, a measurement directory or a directory of curl_k* files."""
        if isinstance(source, (str, Path)):
            directory = Path(source)
            if (directory / series_file_name(1, 1)).exists():
                return MeasurementSet.load(directory)
            return [read_vector_field(directory / f"curl_k{k}") for k in (1, 2, 3)]
        if isinstance(source, (LeadSystem, MeasurementSet)):
            return source
        if isinstance(source, (list, tuple)):
            return list(source)
        raise TypeError(f"Unsupported acoustic_synth input: {type(source).__name__}")

    def transform_data(self) -> MeasurementSet:
        cfg = self.config
        if isinstance(self._inputs, MeasurementSet):
            data = self._inputs
        else:
            data = synthesize(
                self._inputs,
                rho=cfg.rho,
                b_magnitude=cfg.b_magnitude,
                m=cfg.resolved_m,
                n_t=cfg.resolved_n_t,
                dt=cfg.resolved_dt,
                c=cfg.c,
                method=cfg.synthesis,
                oversampling=cfg.quadrature_oversampling,
                max_workers=cfg.max_workers,
            )
        self.clean = data
        if cfg.noise_level > 0.0:
            data = add_noise(data, cfg.noise_level, cfg.seed)
        return data


__all__ = [
    "face_points",
    "fibonacci_sphere",
    "sphere_point_count",
    "spherical_mean",
    "gaussian_spherical_mean",
    "gaussian_source_series",
    "padded_size",
    "KSpacePropagator",
    "quadrature_series",
    "default_acquisition",
    "synthesize",
    "add_noise",
    "AcousticSynthStage",
]
