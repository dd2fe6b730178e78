import numpy as np
import pytest

from maet.core.enums import Face
from maet.core.errors import SolverConvergenceError, StageError
from maet.core.fields import (
    CURL_PARITY,
    CURRENT_PARITY,
    ScalarField3,
    volume_weights,
)
from maet.core.models import PhantomSpec, PipelineConfig
from maet.core.spectral import divergence
from maet.stages.forward_em import (
    Conductivity,
    ForwardEMStage,
    LeadSolver,
    NeumannPreconditioner,
    assemble_operator,
    boundary_current,
    compute_current,
    compute_curls,
    current_deviation,
    flux_residual,
    linear_part,
    neumann_rhs,
    plane_fluxes,
    solve_leads,
    solve_potential,
)
from maet.workbench.phantoms import make_phantom


def test_boundary_current_pattern():
    pattern = boundary_current(1)
    assert pattern.flux(Face.X1_HIGH) == 0.5
    assert pattern.flux(Face.X1_LOW) == -0.5
    assert pattern.flux(Face.X3_HIGH) == 0.0
    assert pattern.total() == 0.0
    with pytest.raises(ValueError):
        boundary_current(4)


def test_conductivity_validation():
    with pytest.raises(ValueError):
        Conductivity(sigma=ScalarField3.constant(9, -1.0))
    values = np.ones((9, 9, 9))
    values[0, 4, 4] = 2.0
    with pytest.raises(ValueError, match="differs from 1"):
        Conductivity(sigma=ScalarField3(values=values))
    assert not Conductivity.uniform(9).support.any()


def test_rhs_is_compatible():
    for k in (1, 2, 3):
        assert abs(neumann_rhs(9, k).sum()) < 1e-14
        assert np.isclose(neumann_rhs(9, k).clip(min=0.0).sum(), 1.0)


def test_preconditioner_inverts_uniform_operator(rng):
    n = 9
    operator = assemble_operator(Conductivity.uniform(n))
    x = rng.standard_normal(n**3)
    x -= np.sum(volume_weights(n).ravel() * x) / np.sum(volume_weights(n))
    y = NeumannPreconditioner(n)(operator @ x)
    weights = volume_weights(n).ravel()
    y -= np.sum(weights * y) / np.sum(weights)
    assert np.allclose(y, x, atol=1e-10)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_uniform_conductivity_gives_linear_potential(k):
    n = 9
    sigma = Conductivity.uniform(n)
    w = solve_potential(sigma, k)
    assert np.allclose(w.values, linear_part(n, k), atol=1e-8)
    deviation = current_deviation(sigma, w, k)
    assert deviation.max_abs() < 1e-8
    assert deviation.parity_signature == CURRENT_PARITY


def test_uniform_lead_system_has_unit_currents_and_no_curls():
    lead = solve_leads(Conductivity.uniform(9))
    for k in (1, 2, 3):
        expected = np.zeros(3)
        expected[k - 1] = 1.0
        assert np.allclose(lead.current(k).stack(), expected, atol=1e-8)
        assert lead.curl(k).max_abs() < 1e-7
        assert lead.curl(k).parity_signature == CURL_PARITY


def test_potential_matches_dense_solve():
    n = 9
    sigma, _ = make_phantom(PhantomSpec.smooth_bumps(), n)
    weights = volume_weights(n).ravel()
    dense = assemble_operator(sigma).toarray()
    for k in (1, 2, 3):
        rhs = neumann_rhs(n, k).ravel()
        exact = np.linalg.lstsq(dense, rhs, rcond=None)[0]
        exact -= np.sum(weights * exact) / np.sum(weights)
        w = solve_potential(sigma, k, tol=1e-12, max_iter=1000)
        error = np.linalg.norm(w.values.ravel() - exact)
        assert error <= 1e-8 * np.linalg.norm(exact)


def test_current_is_conserved_through_every_plane(bump_phantom):
    sigma, _ = bump_phantom
    for k in (1, 2, 3):
        w = solve_potential(sigma, k)
        fluxes = plane_fluxes(sigma, w)
        assert np.allclose(fluxes[k - 1], 1.0, atol=1e-8)
        assert flux_residual(sigma, w, k) <= 1e-8


def test_potential_has_zero_mean(bump_phantom):
    sigma, _ = bump_phantom
    w = solve_potential(sigma, 2)
    assert abs(np.sum(volume_weights(17) * w.values)) < 1e-12


def test_symmetric_phantom_gives_swapped_currents(bump_phantom):
    sigma, _ = bump_phantom
    lead = solve_leads(sigma, tol=1e-12, max_iter=1000)
    w1, w2 = lead.potentials[0].values, lead.potentials[1].values
    assert np.allclose(w2, w1.transpose(1, 0, 2), atol=1e-9)
    j1, j2 = lead.current(1), lead.current(2)
    assert np.allclose(j2[1].values, j1[0].values.transpose(1, 0, 2), atol=1e-7)


def test_threaded_leads_match_sequential(bump_phantom):
    sigma, _ = bump_phantom
    serial = solve_leads(sigma)
    threaded = solve_leads(sigma, max_workers=3)
    for k in (1, 2, 3):
        assert np.allclose(
            serial.potentials[k - 1].values,
            threaded.potentials[k - 1].values,
            atol=1e-14,
        )


def test_compute_curls_matches_stored_curls(bump_phantom):
    lead = solve_leads(bump_phantom[0])
    for stored, recomputed in zip(lead.curls, compute_curls(lead)):
        assert np.array_equal(stored.stack(), recomputed.stack())


def test_curls_vanish_outside_support():
    sigma, _ = make_phantom(PhantomSpec.smooth_bumps(), 33)
    lead = solve_leads(sigma)
    outside = ~sigma.support
    for k in (1, 2, 3):
        c = lead.curl(k).stack()
        assert np.max(np.abs(c)) > 0.0
        assert np.max(np.abs(c[outside])) <= 1e-6 * np.max(np.abs(c))


def test_currents_have_zero_spectral_divergence():
    sigma, _ = make_phantom(PhantomSpec.smooth_bumps(), 33)
    lead = solve_leads(sigma)
    for k in (1, 2, 3):
        scale = np.pi * 32 * lead.current(k).max_abs()
        assert divergence(lead.deviations[k - 1]).max_abs() <= 1e-8 * scale


def test_currents_keep_the_injected_boundary_flux(bump_phantom):
    lead = solve_leads(bump_phantom[0])
    for k in (1, 2, 3):
        j = lead.current(k).stack()
        for axis in range(3):
            expected = 1.0 if axis == k - 1 else 0.0
            for side in (0, -1):
                normal = np.take(j[..., axis], side, axis=axis)
                assert np.allclose(normal, expected, atol=1e-12)


def test_compute_current_matches_lead_system(bump_phantom):
    sigma, _ = bump_phantom
    lead = solve_leads(sigma)
    for k in (1, 2, 3):
        current = compute_current(sigma, lead.potentials[k - 1], k)
        assert np.allclose(current.stack(), lead.current(k).stack(), atol=1e-12)


def test_curls_are_orthogonal_to_the_current(bump_phantom):
    lead = solve_leads(bump_phantom[0])
    for k in (1, 2, 3):
        dot = np.sum(lead.curl(k).stack() * lead.current(k).stack(), axis=-1)
        assert np.max(np.abs(dot)) <= 1e-12 * max(lead.curl(k).max_abs(), 1.0)


@pytest.mark.slow
def test_curls_vanish_outside_support_fine_grid():
    sigma, _ = make_phantom(PhantomSpec.smooth_bumps(), 65)
    lead = solve_leads(sigma)
    outside = ~sigma.support
    for k in (1, 2, 3):
        c = lead.curl(k).stack()
        assert np.max(np.abs(c[outside])) <= 1e-6 * np.max(np.abs(c))


def test_solver_reports_non_convergence(bump_phantom):
    solver = LeadSolver(bump_phantom[0], tol=1e-14, max_iter=1)
    with pytest.raises(SolverConvergenceError) as info:
        solver.solve(1)
    assert info.value.iterations == 1
    assert info.value.residual > 0.0


def test_stage_accepts_log_sigma_and_tags_errors(bump_phantom):
    _, log_sigma = bump_phantom
    stage = ForwardEMStage(PipelineConfig(n=17))
    lead = stage.process(log_sigma)
    assert lead.n == 17
    assert stage.report.flux_residuals and max(stage.report.flux_residuals) < 1e-8
    with pytest.raises(StageError, match="forward_em"):
        ForwardEMStage(PipelineConfig(n=9)).process(log_sigma)
