import numpy as np
import pytest

from maet.core.fields import grid_coordinates
from maet.core.models import PhantomSpec
from maet.workbench.phantoms import (
    bump,
    log_sigma_values,
    make_phantom,
    profile,
    smoothed_ball,
)


def test_profile_endpoints_and_monotonicity():
    s = np.linspace(0.0, 1.0, 101)
    values = profile(s)
    assert values[0] == pytest.approx(1.0)
    assert values[-1] == pytest.approx(0.0, abs=1e-15)
    assert profile(0.5) == pytest.approx(0.5)
    assert np.all(np.diff(values) <= 0.0)
    assert profile(-0.3) == pytest.approx(1.0)
    assert profile(1.7) == pytest.approx(0.0, abs=1e-15)


def test_profile_is_flat_at_both_ends():
    assert 1.0 - profile(1e-2) < 1e-12
    assert profile(1.0 - 1e-2) < 1e-12


@pytest.mark.parametrize("smoothness", [3, 5])
def test_profile_vanishes_to_order_2p_at_the_edge(smoothness):
    # phi(1 - t) ~ t^(2p): the first 2p - 1 derivatives vanish at s = 1.
    t = 1e-3
    ratio = profile(1.0 - 2.0 * t, smoothness) / profile(1.0 - t, smoothness)
    assert ratio == pytest.approx(2.0 ** (2 * smoothness), rel=1e-3)


def test_bump_is_supported_in_its_ball():
    n = 17
    values = bump(n, (0.5, 0.5, 0.5), 0.25)
    assert values[8, 8, 8] == pytest.approx(1.0)
    x = grid_coordinates(n)
    far = np.abs(x - 0.5) >= 0.25
    assert np.all(values[far, :, :] == 0.0)


def test_smoothed_ball_has_flat_core():
    n = 33
    values = smoothed_ball(n, (0.5, 0.5, 0.5), 0.25, 0.1)
    assert values.min() >= 0.0 and values.max() <= 1.0
    # |x - c| <= 0.15 is the untouched core.
    assert values[16, 16, 16] == pytest.approx(1.0)
    assert values[20, 16, 16] == pytest.approx(1.0)
    assert 0.0 < values[22, 16, 16] < 1.0
    assert values[24, 16, 16] == 0.0


def test_smooth_bumps_have_alternating_signs():
    n = 17
    values = log_sigma_values(PhantomSpec.smooth_bumps(), n)
    assert values[4, 4, 8] == pytest.approx(0.5)
    assert values[4, 12, 8] == pytest.approx(-0.5)
    assert values[12, 4, 8] == pytest.approx(-0.5)
    assert values[12, 12, 8] == pytest.approx(0.5)


def test_make_phantom_builds_a_valid_conductivity():
    sigma, log_sigma = make_phantom(PhantomSpec.smoothed_balls(), 33)
    assert np.allclose(np.log(sigma.sigma.values), log_sigma.values)
    assert 0.0 <= log_sigma.values.min() and log_sigma.values.max() <= 1.0 + 1e-12
    assert sigma.support.any()


def test_empty_spec_gives_uniform_conductivity():
    sigma, log_sigma = make_phantom(PhantomSpec.empty(), 9)
    assert log_sigma.max_abs() == 0.0
    assert np.all(sigma.sigma.values == 1.0)
    with pytest.raises(ValueError):
        make_phantom(PhantomSpec.empty(), 2)
