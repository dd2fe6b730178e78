"""ln(sigma) phantoms on the n^3 grid.

Profile used by both families:

    phi(s) = I(cos^2(pi s / 2); p, p),   0 <= s <= 1,

the regularized incomplete beta function with p = `smoothness`. It is 1
at s = 0, 0 at s = 1, decreasing in between, and its first 2p - 1
derivatives vanish at both ends (p = 5 gives a profile whose first nine
derivatives vanish). In terms of cos(pi s) it is a polynomial of
degree 2p - 1.
"""

import logging
from typing import Union

import numpy as np
from scipy.special import betainc

from ..core.enums import PhantomKind
from ..core.fields import ScalarField3, mesh
from ..core.models import PhantomSpec
from ..stages.forward_em import Conductivity

logger = logging.getLogger(__name__)


def profile(s: Union[float, np.ndarray], smoothness: int = 5) -> np.ndarray:
    """phi(s) for s in [0, 1]; 1 for s < 0 and 0 for s > 1."""
    s = np.clip(np.asarray(s, dtype=np.float64), 0.0, 1.0)
    p = float(smoothness)
    return betainc(p, p, np.cos(0.5 * np.pi * s) ** 2)


def _distances(n: int, center) -> np.ndarray:
    x, y, z = mesh(n)
    return np.sqrt((x - center[0]) ** 2 + (y - center[1]) ** 2 + (z - center[2]) ** 2)


def bump(n: int, center, radius: float, smoothness: int = 5) -> np.ndarray:
    """phi(|x - center| / radius), zero outside the ball."""
    r = _distances(n, center)
    return np.where(r < radius, profile(r / radius, smoothness), 0.0)


def smoothed_ball(
    n: int, center, radius: float, edge_width: float, smoothness: int = 5
) -> np.ndarray:
    """Indicator of |x - center| < radius with the outer edge_width rolled off."""
    r = _distances(n, center)
    inner = radius - edge_width
    values = profile((r - inner) / edge_width, smoothness)
    return np.where(r < radius, values, 0.0)


def log_sigma_values(spec: PhantomSpec, n: int) -> np.ndarray:
    values = np.zeros((n, n, n))
    for center, amplitude, radius in zip(spec.centers, spec.amplitudes, spec.radii):
        if spec.kind is PhantomKind.SMOOTHED_BALLS:
            ball = smoothed_ball(n, center, radius, spec.edge_width, spec.smoothness)
            values += amplitude * ball
        else:
            values += amplitude * bump(n, center, radius, spec.smoothness)
    return values


def make_phantom(spec: PhantomSpec, n: int) -> tuple[Conductivity, ScalarField3]:
    """Conductivity sigma = exp(ln sigma) and its ln sigma field.

    Args:
        spec: phantom family, centers, amplitudes and radii.
        n: nodes per axis.

    Returns:
        The Conductivity and the ln(sigma) field it was built from.

    Raises:
        ValueError: n is below 3, or the support reaches the margin band.
    """
    if n < 3:
        raise ValueError(f"Grid must have at least 3 nodes per axis, got {n}")
    log_sigma = ScalarField3(values=log_sigma_values(spec, n))
    conductivity = Conductivity.from_log_sigma(log_sigma, margin=spec.margin)
    logger.info(
        f"Phantom {spec.kind.value} on n={n}: {len(spec.centers)} items, "
        f"ln sigma in [{log_sigma.values.min():.3f}, {log_sigma.values.max():.3f}]"
    )
    return conductivity, log_sigma


__all__ = ["profile", "bump", "smoothed_ball", "log_sigma_values", "make_phantom"]
