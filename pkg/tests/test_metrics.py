import numpy as np
import pytest

from maet.core.errors import GridMismatchError
from maet.core.fields import ScalarField3, VectorField3
from maet.workbench.metrics import ReconstructionMetrics, metrics, relative_error


def test_identical_fields_have_zero_error(bump_phantom):
    _, log_sigma = bump_phantom
    result = metrics(log_sigma, log_sigma)
    assert isinstance(result, ReconstructionMetrics)
    assert result.relative_l2 == 0.0 and result.max_abs == 0.0
    assert result.truth_norm > 0.0


def test_scaled_reconstruction_has_relative_error(bump_phantom):
    _, log_sigma = bump_phantom
    recon = 1.1 * log_sigma
    assert relative_error(recon, log_sigma) == pytest.approx(0.1)
    result = metrics(recon, log_sigma, margin=0.1)
    # The phantom lives inside the margin, so both regions agree.
    assert result.relative_l2_interior == pytest.approx(0.1)
    assert result.max_abs == pytest.approx(0.1 * log_sigma.max_abs())


def test_interior_ignores_the_margin():
    truth = ScalarField3.constant(11, 1.0)
    values = np.ones((11, 11, 11))
    values[0] = 3.0
    result = metrics(ScalarField3(values=values), truth, margin=0.2)
    assert result.max_abs == 2.0
    assert result.max_abs_interior == 0.0
    assert result.relative_l2_interior == 0.0
    assert result.relative_l2 > 0.0


def test_zero_truth_reports_absolute_errors():
    truth = ScalarField3.zeros(9)
    result = metrics(ScalarField3.constant(9, 0.5), truth)
    assert result.truth_norm == 0.0
    assert result.relative_l2 == pytest.approx(0.5)


def test_vector_fields_and_parity_are_supported(uniform_vector):
    doubled = VectorField3.from_arrays(
        [2.0 * c.values for c in uniform_vector], uniform_vector.parity_signature
    )
    assert relative_error(doubled, uniform_vector) == pytest.approx(1.0)
    odd = ScalarField3.zeros(9, "odd")
    assert relative_error(odd, ScalarField3.zeros(9)) == 0.0


def test_mismatched_inputs_are_rejected(uniform_vector):
    with pytest.raises(GridMismatchError):
        metrics(ScalarField3.zeros(9), ScalarField3.zeros(5))
    with pytest.raises(TypeError):
        metrics(ScalarField3.zeros(9), uniform_vector)
