from enum import Enum


class Parity(str, Enum):
    """Symmetric extension of a field along one axis."""

    EVEN = "even"  # cosine series
    ODD = "odd"  # sine series, zero on both boundary planes

    @property
    def code(self) -> int:
        return 0 if self is Parity.EVEN else 1

    @classmethod
    def from_code(cls, code: int) -> "Parity":
        if code == 0:
            return cls.EVEN
        if code == 1:
            return cls.ODD
        raise ValueError(f"Unknown parity code: {code}")

    def flipped(self) -> "Parity":
        return Parity.ODD if self is Parity.EVEN else Parity.EVEN


class Face(int, Enum):
    """Cube faces, ordered face-major as stored in measurement files."""

    X1_LOW = 0
    X1_HIGH = 1
    X2_LOW = 2
    X2_HIGH = 3
    X3_LOW = 4
    X3_HIGH = 5

    @property
    def axis(self) -> int:
        return self.value // 2

    @property
    def side(self) -> int:
        return self.value % 2

    @property
    def tangential_axes(self) -> tuple[int, int]:
        return tuple(a for a in range(3) if a != self.axis)  # type: ignore[return-value]


class PhantomKind(str, Enum):
    SMOOTH_BUMPS = "smooth-bumps"
    SMOOTHED_BALLS = "smoothed-balls"


class GradientMethod(int, Enum):
    """Per-voxel tag of the pointwise gradient solve."""

    FULL = 0
    TRUNCATED_12 = 1
    TRUNCATED_13 = 2
    TRUNCATED_23 = 3
    SKIPPED = 4

    @property
    def label(self) -> str:
        if self is GradientMethod.FULL:
            return "full"
        if self is GradientMethod.SKIPPED:
            return "skipped"
        a, b = TRUNCATED_PAIRS[self]
        return f"truncated-({a + 1},{b + 1})"


class SynthesisMethod(str, Enum):
    SPECTRAL = "spectral"
    QUADRATURE = "quadrature"


class IntegrationMethod(str, Enum):
    SPECTRAL = "spectral"
    TRAPEZOID = "trapezoid"


TRUNCATED_PAIRS: dict[GradientMethod, tuple[int, int]] = {
    GradientMethod.TRUNCATED_12: (0, 1),
    GradientMethod.TRUNCATED_13: (0, 2),
    GradientMethod.TRUNCATED_23: (1, 2),
}


__all__ = [
    "Parity",
    "Face",
    "PhantomKind",
    "GradientMethod",
    "SynthesisMethod",
    "IntegrationMethod",
    "TRUNCATED_PAIRS",
]
