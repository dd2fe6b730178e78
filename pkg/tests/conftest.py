import numpy as np
import pytest

from maet.core.fields import ScalarField3, VectorField3, mesh
from maet.core.models import PhantomSpec, PipelineConfig
from maet.workbench.phantoms import make_phantom


def random_field(rng: np.random.Generator, n: int, parity) -> ScalarField3:
    """Random samples with the odd-axis boundary planes zeroed."""
    return ScalarField3.project(rng.standard_normal((n, n, n)), parity)


def gaussian(n: int, center=(0.5, 0.5, 0.5), width: float = 0.07) -> np.ndarray:
    x, y, z = mesh(n)
    r2 = (x - center[0]) ** 2 + (y - center[1]) ** 2 + (z - center[2]) ** 2
    return np.exp(-r2 / (2.0 * width * width))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_config():
    return PipelineConfig(n=17)


@pytest.fixture
def bump_spec():
    return PhantomSpec.smooth_bumps()


@pytest.fixture
def bump_phantom(bump_spec):
    return make_phantom(bump_spec, 17)


@pytest.fixture
def uniform_vector():
    return VectorField3.constant(9, (1.0, 2.0, 3.0))
