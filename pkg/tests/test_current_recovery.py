import numpy as np
import pytest

from maet.core.errors import ParityError, StageError
from maet.core.fields import CURL_PARITY, CURRENT_PARITY, VectorField3
from maet.core.io import write_vector_field
from maet.core.models import PhantomSpec, PipelineConfig
from maet.core.spectral import curl
from maet.stages.current_recovery import (
    CurrentRecoveryStage,
    boundary_flux_residual,
    divergence_residual,
    recover_current,
    recover_current_deviation,
    recover_currents,
)
from maet.stages.forward_em import solve_leads
from maet.workbench.phantoms import make_phantom
from tests.conftest import gaussian, random_field


def zero_curl(n):
    return VectorField3.zeros(n, CURL_PARITY)


@pytest.fixture(scope="module")
def lead33():
    sigma, _ = make_phantom(PhantomSpec.smooth_bumps(), 33)
    return solve_leads(sigma)


def test_zero_curl_gives_unit_current():
    for k in (1, 2, 3):
        current = recover_current(zero_curl(9), k)
        expected = np.zeros(3)
        expected[k - 1] = 1.0
        assert np.allclose(current.stack(), expected)
        assert boundary_flux_residual(current, k) == 0.0


def test_recovery_needs_curl_parity():
    with pytest.raises(ParityError):
        recover_current_deviation(VectorField3.zeros(9, CURRENT_PARITY))


def test_recovered_deviation_has_the_given_curl():
    g = gaussian(33, width=0.07)
    potential = VectorField3.from_arrays([g, 0.5 * g, -g], CURRENT_PARITY, project=True)
    c = curl(potential)
    deviation = recover_current_deviation(c)
    assert deviation.parity_signature == CURRENT_PARITY
    assert (curl(deviation) - c).norm() <= 1e-7 * c.norm()


def test_round_trip_of_forward_currents(lead33):
    for k in (1, 2, 3):
        current = recover_current(lead33.curl(k), k)
        exact = lead33.current(k)
        assert (current - exact).norm() <= 3e-2 * exact.norm()


def test_boundary_flux_is_exact(lead33):
    currents, reports = recover_currents(lead33.curls)
    for k, (current, report) in enumerate(zip(currents, reports), start=1):
        assert report.k == k
        assert report.boundary_flux_residual <= 1e-6
        assert boundary_flux_residual(current, k) <= 1e-6
        assert divergence_residual(current, k) <= 1e-8


def test_recovery_does_not_amplify_perturbations(rng):
    n = 17
    for _ in range(5):
        noise = VectorField3.from_components([random_field(rng, n, p) for p in CURL_PARITY])
        response = recover_current_deviation(noise)
        assert response.norm() <= 1.5 * noise.norm()


def test_stage_reads_curls_from_files(tmp_path, lead33):
    paths = []
    for k in (1, 2, 3):
        write_vector_field(lead33.curl(k), tmp_path / f"curl_k{k}")
        paths.append(tmp_path / f"curl_k{k}")
    stage = CurrentRecoveryStage(PipelineConfig(n=33))
    currents = stage.process(paths)
    assert len(currents) == 3 and len(stage.reports) == 3
    with pytest.raises(StageError):
        CurrentRecoveryStage().process(paths[:2])


@pytest.mark.slow
def test_round_trip_of_forward_currents_fine_grid():
    sigma, _ = make_phantom(PhantomSpec.smooth_bumps(), 65)
    lead = solve_leads(sigma)
    current = recover_current(lead.curl(1), 1)
    exact = lead.current(1)
    assert (current - exact).norm() <= 5e-3 * exact.norm()
