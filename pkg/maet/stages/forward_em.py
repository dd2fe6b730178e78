"""Lead potentials, currents and curls for a given conductivity.

The operator div(sigma grad w) is discretized with a node-centered finite
volume scheme: every node owns the part of the cell [x - h/2, x + h/2]^3
inside the cube, faces between neighbours carry the harmonic mean of
sigma, and the Neumann data enters as the boundary part of each control
volume's flux balance.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import fft as sfft
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, cg

from ..core.base import BaseStage
from ..core.enums import Face
from ..core.errors import GridMismatchError, SolverConvergenceError
from ..core.fields import (
    ALL_EVEN,
    CURL_PARITY,
    CURRENT_PARITY,
    GENERIC_PARITY,
    ScalarField3,
    VectorField3,
    grid_coordinates,
    grid_spacing,
    interior_mask,
    trapezoid_weights,
    volume_weights,
)
from ..core.io import read_field
from ..core.models import ForwardEMReport, LeadSolveReport
from ..core.spectral import derivative, fft_workers, gradient, solenoidal_current

logger = logging.getLogger(__name__)

# Normal flux actually injected is LEAD_FLUX_SCALE * I_k, i.e. +-1, so
# that the uniform-conductivity current is exactly e_k.
LEAD_FLUX_SCALE = 2.0


class BoundaryCurrent(BaseModel):
    """Face-wise constant normal current pattern I_k."""

    k: int = Field(ge=1, le=3)
    fluxes: dict[Face, float]

    def flux(self, face: Face) -> float:
        return self.fluxes[Face(face)]

    def total(self) -> float:
        """Integral over the boundary; every face has unit area."""
        return float(sum(self.fluxes.values()))


def boundary_current(k: int) -> BoundaryCurrent:
    if k not in (1, 2, 3):
        raise ValueError(f"Lead index k must be 1, 2 or 3, got {k}")
    fluxes = {face: 0.0 for face in Face}
    fluxes[Face(2 * (k - 1))] = -0.5
    fluxes[Face(2 * (k - 1) + 1)] = 0.5
    return BoundaryCurrent(k=k, fluxes=fluxes)


class Conductivity(BaseModel):
    """Strictly positive sigma that equals 1 in a band of width `margin` along the boundary."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    sigma: ScalarField3
    margin: float = Field(default=0.1, ge=0.0, lt=0.5)

    @model_validator(mode="after")
    def validate_sigma(self) -> "Conductivity":
        if self.sigma.parity != ALL_EVEN:
            raise ValueError("Conductivity must carry all-even parity")
        values = self.sigma.values
        if np.min(values) <= 0.0:
            raise ValueError(f"Conductivity must be positive, min is {np.min(values):.3e}")
        band = ~interior_mask(self.n, self.margin)
        if np.any(np.abs(values[band] - 1.0) > 1e-12):
            raise ValueError(f"Conductivity differs from 1 within {self.margin} of the boundary")
        return self

    @property
    def n(self) -> int:
        return self.sigma.n

    @property
    def support(self) -> np.ndarray:
        """Mask of Omega_1 nodes, where sigma differs from 1."""
        return self.sigma.values != 1.0

    @property
    def log_sigma(self) -> ScalarField3:
        return ScalarField3(values=np.log(self.sigma.values))

    @classmethod
    def uniform(cls, n: int, margin: float = 0.1) -> "Conductivity":
        return cls(sigma=ScalarField3.constant(n, 1.0), margin=margin)

    @classmethod
    def from_log_sigma(cls, log_sigma: ScalarField3, margin: float = 0.1) -> "Conductivity":
        return cls(sigma=ScalarField3(values=np.exp(log_sigma.values)), margin=margin)


def _along(axis: int, index) -> tuple:
    sl = [slice(None)] * 3
    sl[axis] = index
    return tuple(sl)


def _tangential_weights(n: int, axis: int) -> np.ndarray:
    """Product of the control-volume width fractions over the two axes other than `axis`."""
    out = np.ones((1, 1, 1))
    for b in range(3):
        if b != axis:
            shape = [1, 1, 1]
            shape[b] = n
            out = out * trapezoid_weights(n).reshape(shape)
    return out


def face_coefficients(sigma: np.ndarray) -> list[np.ndarray]:
    """Conductance h * sigma_face * w_b * w_c of every interior face, per axis."""
    n = sigma.shape[0]
    h = grid_spacing(n)
    coefficients = []
    for axis in range(3):
        lo = sigma[_along(axis, slice(None, -1))]
        hi = sigma[_along(axis, slice(1, None))]
        harmonic = 2.0 * lo * hi / (lo + hi)
        coefficients.append(h * harmonic * _tangential_weights(n, axis))
    return coefficients


def assemble_operator(conductivity: Conductivity) -> sparse.csr_matrix:
    """Symmetric positive semidefinite matrix of -div(sigma grad) on the node grid."""
    n = conductivity.n
    index = np.arange(n**3).reshape(n, n, n)
    diagonal = np.zeros((n, n, n))
    rows, cols, vals = [], [], []
    for axis, g in enumerate(face_coefficients(conductivity.sigma.values)):
        lo = _along(axis, slice(None, -1))
        hi = _along(axis, slice(1, None))
        p, q, gv = index[lo].ravel(), index[hi].ravel(), g.ravel()
        rows += [p, q]
        cols += [q, p]
        vals += [-gv, -gv]
        diagonal[lo] += g
        diagonal[hi] += g
    rows.append(index.ravel())
    cols.append(index.ravel())
    vals.append(diagonal.ravel())
    matrix = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n**3, n**3),
    )
    return matrix.tocsr()


def neumann_rhs(n: int, k: int) -> np.ndarray:
    """Injected boundary current of every control volume for lead k."""
    pattern = boundary_current(k)
    h = grid_spacing(n)
    axis = k - 1
    area = h * h * _tangential_weights(n, axis)
    rhs = np.zeros((n, n, n))
    for face in (Face(2 * axis), Face(2 * axis + 1)):
        plane = _along(axis, slice(-1, None) if face.side else slice(0, 1))
        rhs[plane] += LEAD_FLUX_SCALE * pattern.flux(face) * area
    return rhs


class NeumannPreconditioner:
    """Exact inverse of the uniform-conductivity operator on mean-free data.

    With sigma = 1 the operator equals h * W * L, W the control-volume
    fractions and L the reflected second-difference Laplacian, which the
    DCT-I diagonalizes with eigenvalues sum(2 - 2 cos(pi l / N)).
    """

    def __init__(self, n: int):
        self.n = n
        h = grid_spacing(n)
        w = trapezoid_weights(n)
        self.scale = h * w[:, None, None] * w[None, :, None] * w[None, None, :]
        lam = 2.0 - 2.0 * np.cos(np.pi * np.arange(n) / (n - 1))
        eigenvalues = lam[:, None, None] + lam[None, :, None] + lam[None, None, :]
        eigenvalues[0, 0, 0] = 1.0
        self.inverse = 1.0 / eigenvalues
        self.inverse[0, 0, 0] = 0.0

    def __call__(self, residual: np.ndarray) -> np.ndarray:
        r = np.asarray(residual).reshape(self.n, self.n, self.n) / self.scale
        coeffs = sfft.idctn(r, type=1, workers=fft_workers()) * self.inverse
        return sfft.dctn(coeffs, type=1, workers=fft_workers()).ravel()

    def as_linear_operator(self) -> LinearOperator:
        size = self.n**3
        return LinearOperator((size, size), matvec=self, dtype=np.float64)


def _remove_mean(values: np.ndarray) -> np.ndarray:
    weights = volume_weights(values.shape[0])
    return values - np.sum(weights * values) / np.sum(weights)


class LeadSolver:
    """Operator and preconditioner for one conductivity, reused across the three leads."""

    def __init__(self, conductivity: Conductivity, tol: float = 1e-10, max_iter: int = 500):
        self.conductivity = conductivity
        self.tol = tol
        self.max_iter = max_iter
        self.operator = assemble_operator(conductivity)
        self.preconditioner = NeumannPreconditioner(conductivity.n)

    def solve(self, k: int) -> tuple[ScalarField3, LeadSolveReport]:
        n = self.conductivity.n
        rhs = neumann_rhs(n, k).ravel()
        rhs -= rhs.mean()
        iterations = 0

        def count(_: np.ndarray) -> None:
            nonlocal iterations
            iterations += 1

        solution, info = cg(
            self.operator,
            rhs,
            rtol=self.tol,
            maxiter=self.max_iter,
            M=self.preconditioner.as_linear_operator(),
            callback=count,
        )
        residual = float(
            np.linalg.norm(rhs - self.operator @ solution) / np.linalg.norm(rhs)
        )
        logger.debug(f"Lead k={k}: {iterations} CG iterations, relative residual {residual:.3e}")
        if info != 0:
            logger.error(f"Lead k={k} did not converge (info={info})")
            raise SolverConvergenceError(
                f"CG for lead k={k} did not reach rtol={self.tol}", iterations, residual
            )
        potential = ScalarField3(values=_remove_mean(solution.reshape(n, n, n)))
        report = LeadSolveReport(k=k, iterations=iterations, residual=residual, converged=True)
        return potential, report


def solve_potential(
    conductivity: Conductivity, k: int, tol: float = 1e-10, max_iter: int = 500
) -> ScalarField3:
    """Zero-mean potential w with div(sigma grad w) = 0 and sigma dw/dn = 2 I_k."""
    boundary_current(k)
    potential, _ = LeadSolver(conductivity, tol, max_iter).solve(k)
    return potential


def linear_part(n: int, k: int) -> np.ndarray:
    x = grid_coordinates(n)
    shape = [1, 1, 1]
    shape[k - 1] = n
    return np.broadcast_to((x - 0.5).reshape(shape), (n, n, n))


def current_deviation(conductivity: Conductivity, potential: ScalarField3, k: int) -> VectorField3:
    """J0 = sigma grad(w - (x_k - 1/2)) + (sigma - 1) e_k, in current parity.

    The finite-volume potential conserves flux only in the scheme's own
    sense, so the spectral divergence of the product is projected out;
    the normal component on the boundary is untouched.

    Args:
        conductivity: sigma the potential was solved for.
        potential: lead-k potential on the same grid.
        k: lead index, 1..3.

    Returns:
        Current-parity field with zero spectral divergence.
    """
    if potential.n != conductivity.n:
        raise GridMismatchError(
            f"Potential on n={potential.n} but conductivity on n={conductivity.n}"
        )
    sigma = conductivity.sigma.values
    deviation = ScalarField3(values=potential.values - linear_part(potential.n, k))
    components = []
    for axis in range(3):
        values = sigma * derivative(deviation, axis).values
        if axis == k - 1:
            values = values + (sigma - 1.0)
        components.append(ScalarField3.project(values, CURRENT_PARITY[axis]))
    return solenoidal_current(VectorField3.from_components(components))


def full_current(deviation: VectorField3, k: int) -> VectorField3:
    """J = e_k + J0, tagged all-even."""
    arrays = [c.values + (1.0 if axis == k - 1 else 0.0) for axis, c in enumerate(deviation)]
    return VectorField3.from_arrays(arrays, GENERIC_PARITY)


def compute_current(conductivity: Conductivity, potential: ScalarField3, k: int) -> VectorField3:
    """Full current J = e_k + J0, tagged all-even."""
    return full_current(current_deviation(conductivity, potential, k), k)


def log_sigma_gradient(conductivity: Conductivity) -> VectorField3:
    """Spectral grad(ln sigma), set to exactly zero outside Omega_1."""
    support = conductivity.support
    return VectorField3.from_components(
        [
            ScalarField3.project(np.where(support, g.values, 0.0), g.parity)
            for g in gradient(conductivity.log_sigma)
        ]
    )


def product_curl(grad_log_sigma: VectorField3, current: VectorField3) -> VectorField3:
    """C = grad(ln sigma) x J, pointwise, in curl parity.

    For div J = 0 and J = sigma grad w this equals curl(J), and it
    vanishes wherever sigma is constant.
    """
    if grad_log_sigma.n != current.n:
        raise GridMismatchError(
            f"Gradient on n={grad_log_sigma.n} but current on n={current.n}"
        )
    c = np.cross(grad_log_sigma.stack(), current.stack(), axis=-1)
    return VectorField3.from_arrays([c[..., a] for a in range(3)], CURL_PARITY, project=True)


def plane_fluxes(conductivity: Conductivity, potential: ScalarField3) -> np.ndarray:
    """Net current through each staggered plane, shape (3, n - 1), positive along +x_a."""
    if potential.n != conductivity.n:
        raise GridMismatchError(
            f"Potential on n={potential.n} but conductivity on n={conductivity.n}"
        )
    w = potential.values
    fluxes = []
    for axis, g in enumerate(face_coefficients(conductivity.sigma.values)):
        jump = w[_along(axis, slice(1, None))] - w[_along(axis, slice(None, -1))]
        other = tuple(b for b in range(3) if b != axis)
        fluxes.append(np.sum(g * jump, axis=other))
    return np.stack(fluxes)


def flux_residual(conductivity: Conductivity, potential: ScalarField3, k: int) -> float:
    """Relative residual of the discrete flux balance, the scheme's measure of div J."""
    rhs = neumann_rhs(conductivity.n, k).ravel()
    residual = rhs - assemble_operator(conductivity) @ potential.values.ravel()
    return float(np.linalg.norm(residual) / np.linalg.norm(rhs))


class LeadSystem(BaseModel):
    """Potentials, currents and curls for the three leads (index 0 is k = 1)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    conductivity: Conductivity
    potentials: list[ScalarField3]
    currents: list[VectorField3]
    deviations: list[VectorField3]
    curls: list[VectorField3]
    reports: list[LeadSolveReport] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_leads(self) -> "LeadSystem":
        for name in ("potentials", "currents", "deviations", "curls"):
            if len(getattr(self, name)) != 3:
                raise ValueError(f"LeadSystem needs three {name}")
        sizes = {f.n for name in ("potentials", "currents", "curls") for f in getattr(self, name)}
        if len(sizes) != 1:
            raise GridMismatchError(f"LeadSystem fields on several grids: {sorted(sizes)}")
        return self

    @property
    def n(self) -> int:
        return self.potentials[0].n

    def current(self, k: int) -> VectorField3:
        return self.currents[k - 1]

    def curl(self, k: int) -> VectorField3:
        return self.curls[k - 1]


def compute_curls(lead: LeadSystem) -> tuple[VectorField3, VectorField3, VectorField3]:
    """C^(k) = curl(J^(k)) of the three leads, in curl parity.

    Args:
        lead: solved lead system.

    Returns:
        The curls for k = 1, 2, 3, each exactly zero outside Omega_1.
    """
    g = log_sigma_gradient(lead.conductivity)
    return tuple(product_curl(g, j) for j in lead.currents)  # type: ignore[return-value]


def solve_leads(
    conductivity: Conductivity,
    tol: float = 1e-10,
    max_iter: int = 500,
    max_workers: int = 1,
) -> LeadSystem:
    """Potentials, currents and curls of the three leads.

    Args:
        conductivity: sigma on the node grid.
        tol: relative CG tolerance.
        max_iter: CG iteration cap per lead.
        max_workers: leads solved in parallel when above 1.

    Returns:
        The LeadSystem, with one LeadSolveReport per lead.

    Raises:
        SolverConvergenceError: a lead did not reach `tol`.
    """
    solver = LeadSolver(conductivity, tol, max_iter)
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            solutions = list(pool.map(solver.solve, (1, 2, 3)))
    else:
        solutions = [solver.solve(k) for k in (1, 2, 3)]
    potentials = [w for w, _ in solutions]
    deviations = [current_deviation(conductivity, w, k) for k, w in zip((1, 2, 3), potentials)]
    currents = [full_current(d, k) for k, d in zip((1, 2, 3), deviations)]
    g = log_sigma_gradient(conductivity)
    curls = [product_curl(g, j) for j in currents]
    return LeadSystem(
        conductivity=conductivity,
        potentials=potentials,
        currents=currents,
        deviations=deviations,
        curls=curls,
        reports=[r for _, r in solutions],
    )


def forward_report(conductivity: Conductivity, lead: LeadSystem) -> ForwardEMReport:
    flux_errors = []
    for k, w in zip((1, 2, 3), lead.potentials):
        fluxes = plane_fluxes(conductivity, w)
        expected = np.zeros_like(fluxes)
        expected[k - 1] = 1.0
        flux_errors.append(float(np.max(np.abs(fluxes - expected))))
    return ForwardEMReport(
        n=lead.n,
        leads=lead.reports,
        flux_residuals=flux_errors,
        divergence_residuals=[
            flux_residual(conductivity, w, k) for k, w in zip((1, 2, 3), lead.potentials)
        ],
    )


class ForwardEMStage(BaseStage):
    """Solves the three lead problems for a conductivity."""

    name = "forward_em"
    report: Optional[ForwardEMReport] = None

    def load_data(self, source: Union[Conductivity, ScalarField3, str, Path]) -> Conductivity:
        """Accept a Conductivity, a ln(sigma) field, or a ln(sigma) field file."""
        if isinstance(source, Conductivity):
            return source
        if isinstance(source, (str, Path)):
            source = read_field(source)
        if isinstance(source, ScalarField3):
            return Conductivity.from_log_sigma(source, self.config.margin)
        raise TypeError(f"Unsupported forward_em input: {type(source).__name__}")

    def transform_data(self) -> LeadSystem:
        conductivity: Conductivity = self._inputs
        if conductivity.n != self.config.n:
            raise GridMismatchError(
                f"Conductivity on n={conductivity.n}, config asks for n={self.config.n}"
            )
        lead = solve_leads(
            conductivity,
            tol=self.config.cg_tol,
            max_iter=self.config.cg_max_iter,
            max_workers=self.config.max_workers,
        )
        self.report = forward_report(conductivity, lead)
        for r in lead.reports:
            logger.info(f"Lead k={r.k}: {r.iterations} iterations, residual {r.residual:.2e}")
        return lead
