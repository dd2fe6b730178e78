from typing import Any, Callable, Iterator, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .enums import Parity
from .errors import GridMismatchError, ParityError

ParitySignature = tuple[Parity, Parity, Parity]

ALL_EVEN: ParitySignature = (Parity.EVEN, Parity.EVEN, Parity.EVEN)
ALL_ODD: ParitySignature = (Parity.ODD, Parity.ODD, Parity.ODD)


def current_parity(axis: int) -> ParitySignature:
    """Odd on `axis`, even elsewhere: component `axis` of a current-type field."""
    signature = tuple(Parity.ODD if a == axis else Parity.EVEN for a in range(3))
    return signature  # type: ignore[return-value]


def curl_parity(axis: int) -> ParitySignature:
    """Even on `axis`, odd elsewhere: component `axis` of the curl of a current."""
    signature = tuple(Parity.EVEN if a == axis else Parity.ODD for a in range(3))
    return signature  # type: ignore[return-value]


CURRENT_PARITY: tuple[ParitySignature, ...] = tuple(current_parity(a) for a in range(3))
CURL_PARITY: tuple[ParitySignature, ...] = tuple(curl_parity(a) for a in range(3))
GENERIC_PARITY: tuple[ParitySignature, ...] = (ALL_EVEN, ALL_EVEN, ALL_EVEN)


def grid_spacing(n: int) -> float:
    return 1.0 / (n - 1)


def grid_coordinates(n: int) -> np.ndarray:
    """Node coordinates x_i = i/(n-1), boundary nodes included."""
    return np.linspace(0.0, 1.0, n)


def mesh(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = grid_coordinates(n)
    return tuple(np.meshgrid(x, x, x, indexing="ij"))  # type: ignore[return-value]


def trapezoid_weights(n: int) -> np.ndarray:
    weights = np.ones(n)
    weights[[0, -1]] = 0.5
    return weights


def volume_weights(n: int) -> np.ndarray:
    """Trapezoidal quadrature weights of the unit cube on the node grid."""
    w = trapezoid_weights(n) * grid_spacing(n)
    return w[:, None, None] * w[None, :, None] * w[None, None, :]


def interior_mask(n: int, margin: float) -> np.ndarray:
    """Boolean mask of nodes at distance >= margin from every face."""
    x = grid_coordinates(n)
    inside = (x >= margin - 1e-12) & (x <= 1.0 - margin + 1e-12)
    return inside[:, None, None] & inside[None, :, None] & inside[None, None, :]


def _coerce_parity(value: Any) -> ParitySignature:
    if isinstance(value, (Parity, str)):
        value = (value,) * 3
    parity = tuple(Parity(p) if not isinstance(p, Parity) else p for p in value)
    if len(parity) != 3:
        raise ValueError(f"Parity signature needs 3 entries, got {len(parity)}")
    return parity  # type: ignore[return-value]


def zero_odd_boundaries(values: np.ndarray, parity: ParitySignature) -> np.ndarray:
    """Return a copy with the boundary planes of every odd axis set to zero."""
    out = np.array(values, dtype=np.float64)
    for axis, p in enumerate(parity):
        if p is Parity.ODD:
            index = [slice(None)] * 3
            index[axis] = [0, -1]
            out[tuple(index)] = 0.0
    return out


class ScalarField3(BaseModel):
    """Samples on the uniform n x n x n node grid over [0,1]^3.

    `parity` declares the symmetric extension used by the spectral
    operators on each axis. Odd axes carry exact zeros on their two
    boundary planes.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    parity: ParitySignature = ALL_EVEN

    @field_validator("values", mode="before")
    @classmethod
    def validate_values(cls, value: Any) -> np.ndarray:
        array = np.array(value, dtype=np.float64)
        if array.ndim != 3 or len(set(array.shape)) != 1:
            raise ValueError(f"Expected a cubic 3D array, got shape {array.shape}")
        if array.shape[0] < 3:
            raise ValueError(f"Grid needs at least 3 points per axis, got {array.shape[0]}")
        if not np.all(np.isfinite(array)):
            raise ValueError("Field values must be finite")
        array.setflags(write=False)
        return array

    @field_validator("parity", mode="before")
    @classmethod
    def validate_parity(cls, value: Any) -> ParitySignature:
        return _coerce_parity(value)

    @model_validator(mode="after")
    def validate_odd_boundaries(self) -> "ScalarField3":
        for axis, p in enumerate(self.parity):
            if p is not Parity.ODD:
                continue
            planes = np.take(self.values, [0, -1], axis=axis)
            if np.any(planes != 0.0):
                raise ParityError(
                    f"Odd parity on axis {axis} requires zero boundary planes"
                )
        return self

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @classmethod
    def zeros(cls, n: int, parity: Any = ALL_EVEN) -> "ScalarField3":
        return cls(values=np.zeros((n, n, n)), parity=parity)

    @classmethod
    def constant(cls, n: int, value: float) -> "ScalarField3":
        return cls(values=np.full((n, n, n), float(value)), parity=ALL_EVEN)

    @classmethod
    def project(cls, values: Any, parity: Any) -> "ScalarField3":
        """Build a field after forcing zeros on the odd-axis boundary planes."""
        signature = _coerce_parity(parity)
        return cls(values=zero_odd_boundaries(values, signature), parity=signature)

    @classmethod
    def from_function(
        cls,
        function: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
        n: int,
        parity: Any = ALL_EVEN,
        project: bool = False,
    ) -> "ScalarField3":
        values = np.broadcast_to(function(*mesh(n)), (n, n, n))
        if project:
            return cls.project(values, parity)
        return cls(values=values, parity=parity)

    def with_parity(self, parity: Any) -> "ScalarField3":
        return ScalarField3(values=self.values, parity=parity)

    def norm(self) -> float:
        """Trapezoidal L2 norm over the unit cube."""
        return float(np.sqrt(np.sum(volume_weights(self.n) * self.values**2)))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def _check_compatible(self, other: "ScalarField3") -> None:
        if other.n != self.n:
            raise GridMismatchError(f"Grid mismatch: n={self.n} vs n={other.n}")
        if other.parity != self.parity:
            raise ParityError(
                f"Parity mismatch: {_describe(self.parity)} vs {_describe(other.parity)}"
            )

    def __add__(self, other: "ScalarField3") -> "ScalarField3":
        self._check_compatible(other)
        return ScalarField3(values=self.values + other.values, parity=self.parity)

    def __sub__(self, other: "ScalarField3") -> "ScalarField3":
        self._check_compatible(other)
        return ScalarField3(values=self.values - other.values, parity=self.parity)

    def __mul__(self, scale: float) -> "ScalarField3":
        return ScalarField3(values=self.values * float(scale), parity=self.parity)

    __rmul__ = __mul__

    def __neg__(self) -> "ScalarField3":
        return self * -1.0


class VectorField3(BaseModel):
    """Three scalar components sharing one grid."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    cx: ScalarField3
    cy: ScalarField3
    cz: ScalarField3

    @model_validator(mode="after")
    def validate_grid(self) -> "VectorField3":
        if not self.cx.n == self.cy.n == self.cz.n:
            raise GridMismatchError(
                f"Components live on different grids: {self.cx.n}, {self.cy.n}, {self.cz.n}"
            )
        return self

    @property
    def n(self) -> int:
        return self.cx.n

    @property
    def components(self) -> tuple[ScalarField3, ScalarField3, ScalarField3]:
        return (self.cx, self.cy, self.cz)

    @property
    def parity_signature(self) -> tuple[ParitySignature, ...]:
        return tuple(c.parity for c in self.components)

    def __iter__(self) -> Iterator[ScalarField3]:  # type: ignore[override]
        return iter(self.components)

    def __getitem__(self, axis: int) -> ScalarField3:
        return self.components[axis]

    @classmethod
    def from_components(cls, components: Sequence[ScalarField3]) -> "VectorField3":
        cx, cy, cz = components
        return cls(cx=cx, cy=cy, cz=cz)

    @classmethod
    def from_arrays(
        cls,
        arrays: Sequence[np.ndarray],
        signature: Sequence[Any] = GENERIC_PARITY,
        project: bool = False,
    ) -> "VectorField3":
        build = ScalarField3.project if project else (
            lambda values, parity: ScalarField3(values=values, parity=parity)
        )
        return cls.from_components([build(a, p) for a, p in zip(arrays, signature)])

    @classmethod
    def zeros(
        cls, n: int, signature: Sequence[Any] = GENERIC_PARITY
    ) -> "VectorField3":
        return cls.from_components([ScalarField3.zeros(n, p) for p in signature])

    @classmethod
    def constant(cls, n: int, vector: Sequence[float]) -> "VectorField3":
        return cls.from_components([ScalarField3.constant(n, v) for v in vector])

    def stack(self) -> np.ndarray:
        """Values as an array of shape (n, n, n, 3)."""
        return np.stack([c.values for c in self.components], axis=-1)

    def with_signature(self, signature: Sequence[Any]) -> "VectorField3":
        return VectorField3.from_components(
            [c.with_parity(p) for c, p in zip(self.components, signature)]
        )

    def norm(self) -> float:
        return float(np.sqrt(sum(c.norm() ** 2 for c in self.components)))

    def max_abs(self) -> float:
        return max(c.max_abs() for c in self.components)

    def __add__(self, other: "VectorField3") -> "VectorField3":
        return VectorField3.from_components(
            [a + b for a, b in zip(self.components, other.components)]
        )

    def __sub__(self, other: "VectorField3") -> "VectorField3":
        return VectorField3.from_components(
            [a - b for a, b in zip(self.components, other.components)]
        )

    def __mul__(self, scale: float) -> "VectorField3":
        return VectorField3.from_components([c * scale for c in self.components])

    __rmul__ = __mul__

    def __neg__(self) -> "VectorField3":
        return self * -1.0


class SpectrumIndex(BaseModel):
    """Mode triple (l, m, n) of the sine/cosine basis on [0,1]^3."""

    model_config = ConfigDict(frozen=True)

    l: int = Field(ge=0)
    m: int = Field(ge=0)
    n: int = Field(ge=0)

    @property
    def eigenvalue(self) -> float:
        return -(np.pi**2) * float(self.l**2 + self.m**2 + self.n**2)

    @property
    def is_zero_mode(self) -> bool:
        return self.l == 0 and self.m == 0 and self.n == 0


def laplacian_eigenvalues(n: int) -> np.ndarray:
    """Eigenvalues -pi^2 (l^2 + m^2 + n^2) for all mode triples on an n-grid."""
    k2 = np.arange(n, dtype=np.float64) ** 2
    return -(np.pi**2) * (k2[:, None, None] + k2[None, :, None] + k2[None, None, :])


def require_same_grid(*fields: Optional[Any]) -> int:
    sizes = {f.n for f in fields if f is not None}
    if len(sizes) != 1:
        raise GridMismatchError(f"Grid mismatch between inputs: sizes {sorted(sizes)}")
    return sizes.pop()


def _describe(parity: ParitySignature) -> str:
    return "(" + ",".join(p.value for p in parity) + ")"


__all__ = [
    "ParitySignature",
    "ALL_EVEN",
    "ALL_ODD",
    "CURRENT_PARITY",
    "CURL_PARITY",
    "GENERIC_PARITY",
    "current_parity",
    "curl_parity",
    "grid_spacing",
    "grid_coordinates",
    "mesh",
    "trapezoid_weights",
    "volume_weights",
    "interior_mask",
    "zero_odd_boundaries",
    "ScalarField3",
    "VectorField3",
    "SpectrumIndex",
    "laplacian_eigenvalues",
    "require_same_grid",
]
