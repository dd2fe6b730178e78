import math
import time

import numpy as np
import pytest

from maet.core.enums import Parity
from maet.core.errors import ParityError
from maet.core.fields import (
    ALL_EVEN,
    ALL_ODD,
    CURL_PARITY,
    CURRENT_PARITY,
    ScalarField3,
    VectorField3,
    current_parity,
    mesh,
)
from maet.core.spectral import (
    curl,
    derivative,
    divergence,
    finite_difference_gradient,
    gradient,
    inverse_transform,
    laplacian,
    leray_project,
    parseval_weights,
    poisson_dirichlet,
    poisson_mixed,
    solenoidal_current,
    spectral_filter,
    spectral_norm,
    transform,
)
from tests.conftest import gaussian, random_field

MIXED = [
    ALL_EVEN,
    ALL_ODD,
    (Parity.ODD, Parity.EVEN, Parity.EVEN),
    (Parity.EVEN, Parity.ODD, Parity.ODD),
]


def random_vector(rng, n, signature):
    return VectorField3.from_components([random_field(rng, n, p) for p in signature])


def dense_operator(apply, n, parity):
    """Matrix of a linear field operator restricted to the free nodes of `parity`."""
    free = ScalarField3.project(np.ones((n, n, n)), parity).values != 0.0
    positions = np.flatnonzero(free)
    matrix = np.empty((positions.size, positions.size))
    for column, position in enumerate(positions):
        unit = np.zeros(n**3)
        unit[position] = 1.0
        image = apply(ScalarField3(values=unit.reshape(n, n, n), parity=parity))
        matrix[:, column] = image.values.ravel()[positions]
    return matrix, positions


@pytest.mark.parametrize("parity", MIXED)
def test_transform_round_trip(rng, parity):
    field = random_field(rng, 9, parity)
    back = inverse_transform(transform(field), parity, 9)
    assert np.allclose(back.values, field.values, atol=1e-12)


def test_transform_of_single_mode():
    x, y, z = mesh(9)
    values = np.sin(np.pi * x) * np.cos(2 * np.pi * y)
    field = ScalarField3.project(values, ("odd", "even", "even"))
    coeffs = transform(field)
    expected = np.zeros_like(coeffs)
    expected[1, 2, 0] = 1.0
    assert np.allclose(coeffs, expected, atol=1e-12)


@pytest.mark.parametrize("parity", MIXED)
def test_parseval(rng, parity):
    for _ in range(25):
        field = random_field(rng, 9, parity)
        assert abs(spectral_norm(field) - field.norm()) <= 1e-12 * field.norm()


def test_parseval_weights_vanish_on_odd_ends():
    w = parseval_weights(5, ALL_ODD)
    assert w[0].sum() == 0.0 and w[:, -1].sum() == 0.0
    assert np.isclose(parseval_weights(5, ALL_EVEN)[0, 0, 0], 1.0)


def test_derivative_is_exact_on_modes():
    x, y, z = mesh(9)
    f = ScalarField3(values=np.cos(2 * np.pi * x) * np.cos(np.pi * y))
    df = derivative(f, 0)
    assert df.parity == (Parity.ODD, Parity.EVEN, Parity.EVEN)
    expected = -2 * np.pi * np.sin(2 * np.pi * x) * np.cos(np.pi * y)
    assert np.allclose(df.values, expected, atol=1e-12)

    g = ScalarField3.project(np.sin(3 * np.pi * z), ("even", "even", "odd"))
    dg = derivative(g, 2)
    assert dg.parity == ALL_EVEN
    assert np.allclose(dg.values, 3 * np.pi * np.cos(3 * np.pi * z), atol=1e-11)


def test_gradient_needs_even_field(rng):
    with pytest.raises(ParityError):
        gradient(random_field(rng, 9, ALL_ODD))


def test_curl_of_gradient_vanishes(rng):
    for _ in range(20):
        f = random_field(rng, 9, ALL_EVEN)
        grad = gradient(f)
        assert grad.parity_signature == CURRENT_PARITY
        assert curl(grad).max_abs() <= 1e-11 * grad.max_abs() * 9


def test_divergence_of_curl_vanishes(rng):
    for _ in range(20):
        v = random_vector(rng, 9, CURRENT_PARITY)
        c = curl(v)
        assert c.parity_signature == CURL_PARITY
        div = divergence(c)
        assert div.parity == ALL_ODD
        assert div.max_abs() <= 1e-11 * c.max_abs() * 9


def test_curl_of_curl_parity_is_current_parity(rng):
    c = random_vector(rng, 9, CURL_PARITY)
    assert curl(c).parity_signature == CURRENT_PARITY
    assert divergence(random_vector(rng, 9, CURRENT_PARITY)).parity == ALL_EVEN


def test_constant_field_has_zero_curl_and_divergence(uniform_vector):
    assert curl(uniform_vector).max_abs() == 0.0
    assert divergence(uniform_vector).max_abs() == 0.0


def test_inconsistent_parity_is_rejected(rng):
    v = VectorField3.from_components(
        [
            random_field(rng, 9, ALL_EVEN),
            random_field(rng, 9, ALL_ODD),
            random_field(rng, 9, ALL_EVEN),
        ]
    )
    with pytest.raises(ParityError):
        divergence(v)


def test_laplacian_of_mode():
    x, y, z = mesh(9)
    values = np.cos(np.pi * x) * np.cos(np.pi * y) * np.cos(2 * np.pi * z)
    lap = laplacian(ScalarField3(values=values))
    assert np.allclose(lap.values, -6 * np.pi**2 * values, atol=1e-10)


def test_poisson_dirichlet_matches_dense_solve(rng):
    n = 9
    matrix, positions = dense_operator(laplacian, n, ALL_ODD)
    rhs = random_field(rng, n, ALL_ODD)
    dense = np.linalg.solve(matrix, rhs.values.ravel()[positions])
    solution = poisson_dirichlet(rhs)
    assert solution.parity == ALL_ODD
    error = np.linalg.norm(solution.values.ravel()[positions] - dense)
    assert error <= 1e-8 * np.linalg.norm(dense)


def test_poisson_dirichlet_needs_odd_rhs(rng):
    with pytest.raises(ParityError):
        poisson_dirichlet(random_field(rng, 9, ALL_EVEN))


def test_poisson_mixed_matches_dense_solve(rng):
    n = 9
    rhs = random_vector(rng, n, CURRENT_PARITY)
    solution = poisson_mixed(rhs)
    for axis in range(3):
        matrix, positions = dense_operator(laplacian, n, current_parity(axis))
        dense = np.linalg.solve(matrix, rhs[axis].values.ravel()[positions])
        got = solution[axis].values.ravel()[positions]
        assert np.linalg.norm(got - dense) <= 1e-8 * np.linalg.norm(dense)


def test_poisson_mixed_checks_parity(rng):
    with pytest.raises(ParityError):
        poisson_mixed(random_vector(rng, 9, CURL_PARITY))


def test_leray_projection_is_divergence_free(rng):
    v = random_vector(rng, 9, CURL_PARITY)
    projected = leray_project(v)
    assert projected.parity_signature == CURL_PARITY
    assert divergence(projected).max_abs() <= 1e-10 * v.max_abs() * 81


def test_leray_projection_keeps_curls(rng):
    c = curl(random_vector(rng, 9, CURRENT_PARITY))
    projected = leray_project(c)
    assert (projected - c).norm() <= 1e-10 * c.norm()


def test_spectral_filter_keeps_low_and_removes_high_modes():
    x, y, z = mesh(9)
    low = ScalarField3(values=np.cos(np.pi * x))
    high = ScalarField3(values=np.cos(8 * np.pi * x))
    assert np.allclose(spectral_filter(low, 0.5).values, low.values, atol=1e-12)
    assert np.allclose(spectral_filter(high, 0.5).values, 0.0, atol=1e-12)
    with pytest.raises(ValueError):
        spectral_filter(low, 0.0)


def test_finite_difference_gradient_of_linear_field():
    field = ScalarField3.from_function(lambda x, y, z: 2 * x - y + 0.5 * z, 9)
    grad = finite_difference_gradient(field)
    assert grad.shape == (3, 9, 9, 9)
    assert np.allclose(grad[0], 2.0) and np.allclose(grad[1], -1.0) and np.allclose(grad[2], 0.5)


def test_solenoidal_current_removes_divergence_and_keeps_curl(rng):
    v = random_vector(rng, 9, CURRENT_PARITY)
    projected = solenoidal_current(v)
    assert projected.parity_signature == CURRENT_PARITY
    assert divergence(projected).max_abs() <= 1e-12 * np.pi * 8 * v.max_abs() * 9
    assert (curl(projected) - curl(v)).norm() <= 1e-12 * curl(v).norm() * 9
    for axis in range(3):
        for side in (0, -1):
            assert not np.any(np.take(projected[axis].values, side, axis=axis))


def test_solenoidal_current_keeps_curls_of_curl_parity_fields(rng):
    v = curl(random_vector(rng, 9, CURL_PARITY))
    assert (solenoidal_current(v) - v).norm() <= 1e-10 * v.norm()


def test_solenoidal_current_checks_parity(rng):
    with pytest.raises(ParityError):
        solenoidal_current(random_vector(rng, 9, CURL_PARITY))


def basis_matrices(n, parity):
    """Node values and derivatives of the 1D basis, indexed [node, mode]."""
    x = np.linspace(0.0, 1.0, n)[:, None]
    l = np.arange(n)[None, :]
    if Parity(parity) is Parity.EVEN:
        return np.cos(np.pi * l * x), -np.pi * l * np.sin(np.pi * l * x)
    values = np.sin(np.pi * l * x)
    values[:, [0, -1]] = 0.0
    slopes = np.pi * l * np.cos(np.pi * l * x)
    slopes[:, [0, -1]] = 0.0
    return values, slopes


def projection_matrix(n, parity):
    """Rows are the discrete inner products that give one mode amplitude."""
    big_n = n - 1
    i = np.arange(n)[None, :]
    l = np.arange(n)[:, None]
    if Parity(parity) is Parity.EVEN:
        weights = np.where((i == 0) | (i == big_n), 0.5, 1.0)
        scale = np.where((l == 0) | (l == big_n), 1.0, 2.0)
        return scale / big_n * weights * np.cos(np.pi * l * i / big_n)
    rows = 2.0 / big_n * np.sin(np.pi * l * i / big_n)
    rows[[0, -1], :] = 0.0
    return rows


@pytest.mark.parametrize("parity", MIXED)
def test_transform_matches_direct_projection(rng, parity):
    n = 9
    field = random_field(rng, n, parity)
    p = [projection_matrix(n, axis_parity) for axis_parity in parity]
    # Plain sextuple sum over nodes and modes.
    direct = np.einsum("li,mj,nk,ijk->lmn", p[0], p[1], p[2], field.values, optimize=False)
    assert np.allclose(transform(field), direct, rtol=0.0, atol=1e-10 * np.abs(direct).max())


def evaluate_modes(coeffs, parity, derivative_axis):
    n = coeffs.shape[0]
    matrices = []
    for axis, axis_parity in enumerate(parity):
        values, slopes = basis_matrices(n, axis_parity)
        matrices.append(slopes if axis == derivative_axis else values)
    return np.einsum("il,jm,kn,lmn->ijk", *matrices, coeffs)


def test_curl_matches_per_mode_differentiation(rng):
    v = random_vector(rng, 9, CURRENT_PARITY)
    expected = []
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        d_cb = evaluate_modes(transform(v[c]), v[c].parity, b)
        d_bc = evaluate_modes(transform(v[b]), v[b].parity, c)
        expected.append(d_cb - d_bc)
    got = curl(v)
    scale = max(np.abs(e).max() for e in expected)
    for a in range(3):
        assert np.allclose(got[a].values, expected[a], rtol=0.0, atol=1e-10 * scale)


def test_gradient_agrees_with_finite_differences_to_second_order():
    errors = []
    for n in (33, 65):
        field = ScalarField3(values=gaussian(n, width=0.08))
        spectral = gradient(field).stack()
        fd = np.moveaxis(finite_difference_gradient(field), 0, -1)
        inner = (slice(1, -1),) * 3
        errors.append(np.max(np.abs(spectral[inner] - fd[inner])))
    h = 1.0 / 32
    assert errors[0] <= 2e3 * h * h
    assert errors[0] / errors[1] > 3.5


def test_round_trip_and_parseval_over_many_fields(rng):
    for parity in MIXED:
        for _ in range(100):
            field = random_field(rng, 9, parity)
            back = inverse_transform(transform(field), parity, 9)
            assert np.max(np.abs(back.values - field.values)) <= 1e-12 * field.max_abs() * 9
            assert abs(spectral_norm(field) - field.norm()) <= 1e-12 * field.norm()


def test_calculus_identities_over_many_fields(rng):
    scale = np.pi * 8
    for _ in range(100):
        grad = gradient(random_field(rng, 9, ALL_EVEN))
        assert curl(grad).max_abs() <= 1e-12 * scale * grad.max_abs()
        c = curl(random_vector(rng, 9, CURRENT_PARITY))
        assert divergence(c).max_abs() <= 1e-12 * scale * c.max_abs()


def _transform_seconds(n, rng):
    field = random_field(rng, n, (Parity.ODD, Parity.EVEN, Parity.EVEN))
    best = math.inf
    for _ in range(3):
        start = time.perf_counter()
        inverse_transform(transform(field), field.parity, n)
        best = min(best, time.perf_counter() - start)
    return best


@pytest.mark.slow
def test_transform_cost_grows_like_n3_log_n(rng):
    _transform_seconds(65, rng)
    ratio = _transform_seconds(129, rng) / _transform_seconds(65, rng)
    assert ratio <= 10.0
