"""Mixed sine/cosine transforms and exact spectral calculus on [0,1]^3.

Every axis of length n = N + 1 is expanded either in cosines
cos(pi l x), l = 0..N (even parity, DCT-I over all nodes) or in sines
sin(pi l x), l = 1..N-1 (odd parity, DST-I over the interior nodes).
Coefficient arrays always have shape (n, n, n); on odd axes the entries
l = 0 and l = N are zero.
"""

import logging
import os
from typing import Optional, Sequence

import numpy as np
from scipy import fft as sfft

from .enums import Parity
from .errors import InternalConsistencyError, ParityError
from .fields import (
    ALL_EVEN,
    ALL_ODD,
    CURRENT_PARITY,
    ParitySignature,
    ScalarField3,
    VectorField3,
    grid_spacing,
    laplacian_eigenvalues,
)

logger = logging.getLogger(__name__)


def fft_workers() -> Optional[int]:
    """Thread count for scipy.fft, taken from MAET_FFT_WORKERS when set."""
    value = os.environ.get("MAET_FFT_WORKERS")
    return int(value) if value else None


def _along(axis: int, index) -> tuple:
    sl = [slice(None)] * 3
    sl[axis] = index
    return tuple(sl)


def _scale_interior(array: np.ndarray, axis: int, factor: float) -> np.ndarray:
    array[_along(axis, slice(1, -1))] *= factor
    return array


def _forward_axis(values: np.ndarray, axis: int, parity: Parity) -> np.ndarray:
    if parity is Parity.EVEN:
        coeffs = sfft.idct(values, type=1, axis=axis, workers=fft_workers())
        return _scale_interior(coeffs, axis, 2.0)
    coeffs = np.zeros_like(values)
    interior = _along(axis, slice(1, -1))
    coeffs[interior] = 2.0 * sfft.idst(
        values[interior], type=1, axis=axis, workers=fft_workers()
    )
    return coeffs


def _inverse_axis(coeffs: np.ndarray, axis: int, parity: Parity) -> np.ndarray:
    if parity is Parity.EVEN:
        halved = _scale_interior(np.array(coeffs), axis, 0.5)
        return sfft.dct(halved, type=1, axis=axis, workers=fft_workers())
    values = np.zeros_like(coeffs)
    interior = _along(axis, slice(1, -1))
    values[interior] = sfft.dst(
        0.5 * coeffs[interior], type=1, axis=axis, workers=fft_workers()
    )
    return values


def transform(field: ScalarField3) -> np.ndarray:
    """Amplitude coefficients a[l, m, k] of `field` in its parity basis.

    f(x) = sum a[l, m, k] * phi_l(x1) * phi_m(x2) * phi_k(x3), where phi is
    cos(pi l x) on even axes and sin(pi l x) on odd axes.
    """
    coeffs = np.array(field.values, dtype=np.float64)
    for axis, parity in enumerate(field.parity):
        coeffs = _forward_axis(coeffs, axis, parity)
    return coeffs


def inverse_transform(
    coefficients: np.ndarray, parity: Sequence[Parity], n: Optional[int] = None
) -> ScalarField3:
    coeffs = np.asarray(coefficients, dtype=np.float64)
    if n is not None and coeffs.shape != (n, n, n):
        raise ValueError(f"Coefficient array shape {coeffs.shape} does not match n={n}")
    if not np.all(np.isfinite(coeffs)):
        raise ValueError("Coefficients must be finite")
    values = coeffs
    for axis, p in enumerate(parity):
        values = _inverse_axis(values, axis, Parity(p))
    # Odd axes come back with exact zeros on their boundary planes.
    return ScalarField3(values=values, parity=tuple(parity))


def parseval_weights(n: int, parity: Sequence[Parity]) -> np.ndarray:
    """Weights W with ||f||^2 (trapezoidal) == sum(W * a**2)."""
    weights = []
    for p in parity:
        w = np.full(n, 0.5)
        if Parity(p) is Parity.EVEN:
            w[[0, -1]] = 1.0
        else:
            w[[0, -1]] = 0.0
        weights.append(w)
    return weights[0][:, None, None] * weights[1][None, :, None] * weights[2][None, None, :]


def _mode_numbers(n: int) -> np.ndarray:
    return np.arange(n, dtype=np.float64)


def _flip(parity: ParitySignature, axis: int) -> ParitySignature:
    flipped = list(parity)
    flipped[axis] = flipped[axis].flipped()
    return tuple(flipped)  # type: ignore[return-value]


def derivative(field: ScalarField3, axis: int) -> ScalarField3:
    """Exact partial derivative along `axis`; the parity on that axis flips.

    cos(pi l x) -> -pi l sin(pi l x) drops the l = N cosine, whose sine
    counterpart vanishes at every node.
    """
    n = field.n
    if np.all(field.values == np.take(field.values, [0], axis=axis)):
        return ScalarField3.zeros(n, _flip(field.parity, axis))
    coeffs = transform(field)
    shape = [1, 1, 1]
    shape[axis] = n
    factor = np.pi * _mode_numbers(n)
    if field.parity[axis] is Parity.EVEN:
        factor = -factor
        factor[-1] = 0.0
    coeffs *= factor.reshape(shape)
    return inverse_transform(coeffs, _flip(field.parity, axis), n)


def gradient(field: ScalarField3) -> VectorField3:
    """Spectral gradient of an all-even field; component a is odd on axis a."""
    if field.parity != ALL_EVEN:
        raise ParityError(f"gradient needs an all-even field, got {_describe(field.parity)}")
    return VectorField3.from_components([derivative(field, a) for a in range(3)])


def _combine(
    plus: ScalarField3, minus: Optional[ScalarField3], what: str
) -> ScalarField3:
    if minus is None:
        return plus
    if plus.parity == minus.parity:
        return plus - minus
    # A vanishing term imposes no parity of its own.
    if not np.any(minus.values):
        return plus
    if not np.any(plus.values):
        return -minus
    raise ParityError(
        f"Inconsistent parity signature for {what}: "
        f"{_describe(plus.parity)} vs {_describe(minus.parity)}"
    )


def curl(v: VectorField3) -> VectorField3:
    components = []
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        components.append(
            _combine(derivative(v[c], b), derivative(v[b], c), f"curl component {a}")
        )
    return VectorField3.from_components(components)


def divergence(v: VectorField3) -> ScalarField3:
    total = derivative(v[0], 0)
    for a in (1, 2):
        term = derivative(v[a], a)
        total = _combine(total, -term, "divergence")
    return total


def laplacian(field: ScalarField3) -> ScalarField3:
    """Multiply every mode by its eigenvalue -pi^2 (l^2 + m^2 + k^2)."""
    coeffs = transform(field) * laplacian_eigenvalues(field.n)
    return inverse_transform(coeffs, field.parity, field.n)


def _divide_by_eigenvalues(coeffs: np.ndarray) -> np.ndarray:
    eigenvalues = laplacian_eigenvalues(coeffs.shape[0])
    out = np.zeros_like(coeffs)
    np.divide(coeffs, eigenvalues, out=out, where=eigenvalues != 0.0)
    return out


def poisson_dirichlet(rhs: ScalarField3) -> ScalarField3:
    """Solve Laplace(u) = rhs with u = 0 on the boundary of the cube."""
    if rhs.parity != ALL_ODD:
        raise ParityError(
            f"poisson_dirichlet needs an all-odd right-hand side, got {_describe(rhs.parity)}"
        )
    return inverse_transform(_divide_by_eigenvalues(transform(rhs)), ALL_ODD, rhs.n)


def poisson_mixed(rhs: VectorField3) -> VectorField3:
    """Componentwise Laplace solve in the current-parity basis."""
    solutions = []
    for axis, component in enumerate(rhs):
        expected = tuple(Parity.ODD if a == axis else Parity.EVEN for a in range(3))
        if component.parity != expected:
            raise ParityError(
                f"poisson_mixed component {axis} needs parity {_describe(expected)}, "
                f"got {_describe(component.parity)}"
            )
        coeffs = transform(component)
        if coeffs[0, 0, 0] != 0.0:
            raise InternalConsistencyError(
                f"Component {axis} has weight {coeffs[0, 0, 0]:.3e} on the zero mode"
            )
        solutions.append(
            inverse_transform(_divide_by_eigenvalues(coeffs), component.parity, rhs.n)
        )
    return VectorField3.from_components(solutions)


def leray_project(v: VectorField3) -> VectorField3:
    """Remove the gradient part: v - grad(phi) with Laplace(phi) = div(v).

    phi vanishes on the boundary.

    Requires a field whose divergence is all-odd (the curl parity).
    """
    div = divergence(v)
    if div.parity != ALL_ODD:
        raise ParityError(
            f"leray_project needs a field with all-odd divergence, got {_describe(div.parity)}"
        )
    phi = poisson_dirichlet(div)
    return VectorField3.from_components(
        [component - derivative(phi, a) for a, component in enumerate(v)]
    )


def poisson_neumann(rhs: ScalarField3) -> ScalarField3:
    """Solve div(grad(u)) = rhs for an all-even rhs, in the cosine basis.

    The spectral gradient drops the l = N cosine on every axis, so each
    mode is divided by the eigenvalue of div(grad) with those terms left
    out. Modes the gradient cannot see, the mean among them, get weight 0.
    """
    if rhs.parity != ALL_EVEN:
        raise ParityError(
            f"poisson_neumann needs an all-even right-hand side, got {_describe(rhs.parity)}"
        )
    n = rhs.n
    squares = (np.pi * _mode_numbers(n)) ** 2
    squares[-1] = 0.0
    eigenvalues = -(
        squares[:, None, None] + squares[None, :, None] + squares[None, None, :]
    )
    weights = np.zeros((n, n, n))
    np.divide(transform(rhs), eigenvalues, out=weights, where=eigenvalues != 0.0)
    return inverse_transform(weights, ALL_EVEN, n)


def solenoidal_current(v: VectorField3) -> VectorField3:
    """Remove the gradient part of a current-parity field: v - grad(phi).

    phi is all-even, so the normal component of v on the boundary is kept;
    the result has a spectral divergence of zero and the same curl as v.
    """
    for axis, component in enumerate(v):
        if component.parity != CURRENT_PARITY[axis]:
            raise ParityError(
                f"solenoidal_current component {axis} needs parity "
                f"{_describe(CURRENT_PARITY[axis])}, got {_describe(component.parity)}"
            )
    phi = poisson_neumann(divergence(v).with_parity(ALL_EVEN))
    return VectorField3.from_components(
        [component - derivative(phi, a) for a, component in enumerate(v)]
    )


def spectral_filter(field: ScalarField3, cutoff: float) -> ScalarField3:
    """Isotropic raised-cosine low-pass in the field's own basis.

    Modes with |(l, m, k)| / N below `cutoff` pass unchanged, the weight
    then falls to zero at |(l, m, k)| / N = 1.
    """
    if not 0.0 < cutoff <= 1.0:
        raise ValueError(f"Filter cutoff must be in (0, 1], got {cutoff}")
    n = field.n
    radius = np.sqrt(-laplacian_eigenvalues(n)) / (np.pi * (n - 1))
    weight = np.ones_like(radius)
    if cutoff < 1.0:
        ramp = (radius - cutoff) / (1.0 - cutoff)
        weight = np.where(
            radius <= cutoff,
            1.0,
            np.where(ramp >= 1.0, 0.0, 0.5 * (1.0 + np.cos(np.pi * np.clip(ramp, 0, 1)))),
        )
    else:
        weight = np.where(radius <= 1.0, 1.0, 0.0)
    return inverse_transform(transform(field) * weight, field.parity, n)


def spectral_norm(field: ScalarField3) -> float:
    """L2 norm from the coefficients; equals field.norm() by Parseval."""
    coeffs = transform(field)
    return float(np.sqrt(np.sum(parseval_weights(field.n, field.parity) * coeffs**2)))


def finite_difference_gradient(field: ScalarField3) -> np.ndarray:
    """Centered second-order differences, shape (3, n, n, n)."""
    return np.stack(np.gradient(field.values, grid_spacing(field.n), edge_order=2))


def _describe(parity: Sequence[Parity]) -> str:
    return "(" + ",".join(Parity(p).value for p in parity) + ")"


__all__ = [
    "fft_workers",
    "transform",
    "inverse_transform",
    "parseval_weights",
    "derivative",
    "gradient",
    "curl",
    "divergence",
    "laplacian",
    "poisson_dirichlet",
    "poisson_mixed",
    "poisson_neumann",
    "leray_project",
    "solenoidal_current",
    "spectral_filter",
    "spectral_norm",
    "finite_difference_gradient",
]
