import json
import math
import sys
from pathlib import Path
from typing import Any, Literal, Optional, Union

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .enums import GradientMethod, IntegrationMethod, PhantomKind, SynthesisMethod
from .errors import IncompleteDataError

SQRT3 = math.sqrt(3.0)

Point3 = tuple[float, float, float]


def default_dt(n: int) -> float:
    """Half the grid spacing."""
    return 0.5 / (n - 1)


def default_n_t(dt: float, c: float = 1.0) -> int:
    """Smallest sample count whose last sample reaches t = sqrt(3)/c."""
    return math.ceil(SQRT3 / (c * dt) - 1e-9) + 1


def covers_diameter(n_t: int, dt: float, c: float) -> bool:
    return (n_t - 1) * dt * c >= SQRT3 - 1e-9


class NoiseRecord(BaseModel):
    level: float = Field(ge=0.0)
    seed: int


class AcquisitionMetadata(BaseModel):
    """Scalars describing how a MeasurementSet was acquired."""

    n: int = Field(ge=3)
    m: int = Field(ge=2)
    n_t: int = Field(ge=2)
    dt: float = Field(gt=0.0)
    c: float = Field(default=1.0, gt=0.0)
    rho: float = Field(default=1.0, gt=0.0)
    b_magnitude: float = Field(default=1.0, gt=0.0)
    noise: Optional[NoiseRecord] = None

    @model_validator(mode="after")
    def validate_coverage(self) -> "AcquisitionMetadata":
        if not covers_diameter(self.n_t, self.dt, self.c):
            raise IncompleteDataError(
                f"Time window (n_t-1)*dt*c = {(self.n_t - 1) * self.dt * self.c:.4f} "
                f"does not reach sqrt(3)"
            )
        if self.m > self.n:
            raise ValueError(f"Face grid m={self.m} exceeds volume grid n={self.n}")
        return self

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_t) * self.dt


class PhantomSpec(BaseModel):
    """Declarative ln(sigma) phantom.

    smooth-bumps: sum of a_i * phi(|x - x_i| / r_i).
    smoothed-balls: sum of a_i times the indicator of |x - x_i| < r_i,
    with the outer `edge_width` of every ball rolled off by phi.
    phi is the regularized incomplete beta function
    I(cos^2(pi s / 2); p, p) with p = `smoothness`, which is 1 at s = 0,
    0 at s = 1 and has 2p - 1 vanishing derivatives at both ends.
    """

    kind: PhantomKind = PhantomKind.SMOOTH_BUMPS
    centers: list[Point3] = Field(default_factory=list)
    amplitudes: list[float] = Field(default_factory=list)
    radii: list[float] = Field(default_factory=list)
    smoothness: int = Field(default=5, ge=1)
    edge_width: float = Field(default=0.03, gt=0.0)
    margin: float = Field(default=0.1, ge=0.0, lt=0.5)

    @field_validator("centers")
    @classmethod
    def validate_centers(cls, v: list[Point3]) -> list[Point3]:
        for center in v:
            if not all(0.0 <= x <= 1.0 for x in center):
                raise ValueError(f"Center {center} lies outside the unit cube")
        return v

    @field_validator("radii")
    @classmethod
    def validate_radii(cls, v: list[float]) -> list[float]:
        if any(r <= 0.0 for r in v):
            raise ValueError("Radii must be positive")
        return v

    @model_validator(mode="after")
    def validate_layout(self) -> "PhantomSpec":
        if not len(self.centers) == len(self.amplitudes) == len(self.radii):
            raise ValueError(
                "centers, amplitudes and radii must have the same length, got "
                f"{len(self.centers)}, {len(self.amplitudes)}, {len(self.radii)}"
            )
        if self.kind is PhantomKind.SMOOTHED_BALLS:
            for r in self.radii:
                if self.edge_width > r:
                    raise ValueError(f"Edge width {self.edge_width} exceeds ball radius {r}")
        lo, hi = self.margin, 1.0 - self.margin
        for center, r in zip(self.centers, self.radii):
            if any(x - r < lo - 1e-12 or x + r > hi + 1e-12 for x in center):
                raise ValueError(
                    f"Support of the item at {center} with radius {r} leaves "
                    f"[{lo:.3f}, {hi:.3f}]^3"
                )
        return self

    @classmethod
    def smooth_bumps(cls, radius: float = 0.15, margin: float = 0.1) -> "PhantomSpec":
        centers = [(0.25, 0.25, 0.5), (0.25, 0.75, 0.5), (0.75, 0.25, 0.5), (0.75, 0.75, 0.5)]
        return cls(
            kind=PhantomKind.SMOOTH_BUMPS,
            centers=centers,
            amplitudes=[0.5, -0.5, -0.5, 0.5],
            radii=[radius] * 4,
            margin=margin,
        )

    @classmethod
    def smoothed_balls(cls, margin: float = 0.1) -> "PhantomSpec":
        # Balls sit on the lines (0.25, 0.25, t), (0.25, t, 0.25), (t, 0.25, 0.25).
        centers: list[Point3] = [(0.25, 0.25, 0.25)]
        radii = [0.10]
        amplitudes = [1.0]
        for t, r, a in ((0.5, 0.08, 0.6), (0.75, 0.06, 0.8)):
            centers += [(0.25, 0.25, t), (0.25, t, 0.25), (t, 0.25, 0.25)]
            radii += [r] * 3
            amplitudes += [a] * 3
        return cls(
            kind=PhantomKind.SMOOTHED_BALLS,
            centers=centers,
            amplitudes=amplitudes,
            radii=radii,
            margin=margin,
        )

    @classmethod
    def default_for(cls, kind: Union[PhantomKind, str]) -> "PhantomSpec":
        if PhantomKind(kind) is PhantomKind.SMOOTHED_BALLS:
            return cls.smoothed_balls()
        return cls.smooth_bumps()

    @classmethod
    def empty(cls, kind: Union[PhantomKind, str] = PhantomKind.SMOOTH_BUMPS) -> "PhantomSpec":
        return cls(kind=PhantomKind(kind))


class TimeReversalConfig(BaseModel):
    """Numerical parameters of the backward wave solve."""

    n: int = Field(ge=3)
    cfl: float = Field(default=0.5, gt=0.0, le=1.0)
    c: float = Field(default=1.0, gt=0.0)
    n_steps: Optional[int] = Field(default=None, ge=1)
    interpolation: Literal["cubic"] = "cubic"
    margin: float = Field(default=0.1, ge=0.0, lt=0.5)

    @property
    def terminal_time(self) -> float:
        return SQRT3 / self.c

    @property
    def max_stable_dt(self) -> float:
        return self.cfl / (self.n - 1) / (self.c * SQRT3)

    @property
    def steps(self) -> int:
        if self.n_steps is not None:
            return self.n_steps
        return math.ceil(self.terminal_time / self.max_stable_dt - 1e-9)

    @property
    def dt(self) -> float:
        return self.terminal_time / self.steps

    @model_validator(mode="after")
    def validate_stability(self) -> "TimeReversalConfig":
        if self.n_steps is not None and self.dt > self.max_stable_dt * (1 + 1e-12):
            raise ValueError(
                f"{self.n_steps} steps give c*dt = {self.c * self.dt:.4e}, above "
                f"cfl*dx/sqrt(3) = {self.c * self.max_stable_dt:.4e}"
            )
        return self


class PipelineConfig(BaseModel):
    """Everything a reconstruction run depends on, seed included."""

    n: int = Field(default=33, ge=5)
    m: Optional[int] = Field(default=None, ge=2)
    n_t: Optional[int] = Field(default=None, ge=5)
    dt: Optional[float] = Field(default=None, gt=0.0)
    c: float = Field(default=1.0, gt=0.0)
    rho: float = Field(default=1.0, gt=0.0)
    b_magnitude: float = Field(default=1.0, gt=0.0)
    noise_level: float = Field(default=0.0, ge=0.0)
    seed: int = 0
    cg_tol: float = Field(default=1e-10, gt=0.0)
    cg_max_iter: int = Field(default=500, ge=1)
    margin: float = Field(default=0.1, ge=0.0, lt=0.5)
    filter_cutoff: Optional[float] = Field(default=None, gt=0.0, le=1.0)
    eps_det: float = Field(default=1e-6, gt=0.0)
    eps_par: float = Field(default=1e-6, gt=0.0)
    cfl: float = Field(default=0.5, gt=0.0, le=1.0)
    synthesis: SynthesisMethod = SynthesisMethod.SPECTRAL
    quadrature_oversampling: float = Field(default=4.0, gt=0.0)
    integration: IntegrationMethod = IntegrationMethod.SPECTRAL
    two_directions: bool = False
    taper: bool = True
    max_workers: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def validate_acquisition(self) -> "PipelineConfig":
        if self.m is not None and self.m > self.n:
            raise ValueError(f"Face grid m={self.m} exceeds volume grid n={self.n}")
        if not covers_diameter(self.resolved_n_t, self.resolved_dt, self.c):
            raise IncompleteDataError(
                f"n_t={self.resolved_n_t}, dt={self.resolved_dt:.4e} do not cover "
                f"t in [0, sqrt(3)/c]"
            )
        return self

    @property
    def resolved_m(self) -> int:
        return self.m if self.m is not None else self.n

    @property
    def resolved_dt(self) -> float:
        return self.dt if self.dt is not None else default_dt(self.n)

    @property
    def resolved_n_t(self) -> int:
        if self.n_t is not None:
            return self.n_t
        return default_n_t(self.resolved_dt, self.c)

    def time_reversal(self) -> TimeReversalConfig:
        return TimeReversalConfig(n=self.n, cfl=self.cfl, c=self.c, margin=self.margin)

    def acquisition(self) -> AcquisitionMetadata:
        return AcquisitionMetadata(
            n=self.n,
            m=self.resolved_m,
            n_t=self.resolved_n_t,
            dt=self.resolved_dt,
            c=self.c,
            rho=self.rho,
            b_magnitude=self.b_magnitude,
        )

    def with_overrides(self, **overrides: Any) -> "PipelineConfig":
        """Copy with every non-None override applied and re-validated."""
        data = self.model_dump()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return PipelineConfig.model_validate(data)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "PipelineConfig":
        path = Path(path)
        if path.suffix.lower() == ".toml":
            with path.open("rb") as handle:
                data = tomllib.load(handle)
        else:
            data = json.loads(path.read_text())
        # A [pipeline] table may wrap the settings.
        data = data.get("pipeline", data)
        return cls.model_validate(data)


class LeadSolveReport(BaseModel):
    k: int
    iterations: int
    residual: float
    converged: bool


class ForwardEMReport(BaseModel):
    n: int
    leads: list[LeadSolveReport]
    flux_residuals: list[float] = Field(default_factory=list)
    divergence_residuals: list[float] = Field(default_factory=list)


class GradientSolveReport(BaseModel):
    """Which pointwise solver produced the gradient at every voxel."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    methods: np.ndarray = Field(exclude=True)
    determinants: np.ndarray = Field(exclude=True)

    @field_validator("methods")
    @classmethod
    def validate_methods(cls, v: np.ndarray) -> np.ndarray:
        if v.ndim != 3:
            raise ValueError(f"Method tags must be a 3D array, got ndim={v.ndim}")
        valid = {m.value for m in GradientMethod}
        if not set(np.unique(v).tolist()) <= valid:
            raise ValueError("Unknown gradient method tag")
        return v

    @property
    def counts(self) -> dict[str, int]:
        return {
            method.label: int(np.count_nonzero(self.methods == method.value))
            for method in GradientMethod
        }

    @property
    def skipped(self) -> int:
        return int(np.count_nonzero(self.methods == GradientMethod.SKIPPED.value))

    @property
    def min_abs_det(self) -> float:
        return float(np.min(np.abs(self.determinants)))

    def summary(self) -> dict[str, Any]:
        return {
            "counts": self.counts,
            "min_abs_det": self.min_abs_det,
            "skipped": self.skipped,
        }


class InversionReport(BaseModel):
    n: int
    n_steps: int
    dt_solver: float
    margin: float
    energies: dict[str, float] = Field(default_factory=dict)
    two_directions: bool = False


class CurrentRecoveryReport(BaseModel):
    k: int
    boundary_flux_residual: float
    divergence_residual: float


__all__ = [
    "SQRT3",
    "default_dt",
    "default_n_t",
    "covers_diameter",
    "NoiseRecord",
    "AcquisitionMetadata",
    "PhantomSpec",
    "TimeReversalConfig",
    "PipelineConfig",
    "LeadSolveReport",
    "ForwardEMReport",
    "GradientSolveReport",
    "InversionReport",
    "CurrentRecoveryReport",
]
