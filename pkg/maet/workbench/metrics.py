import logging
from typing import Union

import numpy as np
from pydantic import BaseModel

from ..core.fields import (
    ScalarField3,
    VectorField3,
    interior_mask,
    require_same_grid,
    volume_weights,
)

logger = logging.getLogger(__name__)

FieldLike = Union[ScalarField3, VectorField3]


class ReconstructionMetrics(BaseModel):
    """Error of a reconstruction against the truth.

    Relative errors divide by the truth's norm over the same region; a
    zero truth leaves them as absolute norms.
    """

    relative_l2: float
    max_abs: float
    relative_l2_interior: float
    max_abs_interior: float
    truth_norm: float
    margin: float


def _values(field: FieldLike) -> np.ndarray:
    if isinstance(field, VectorField3):
        return field.stack()
    return field.values[..., None]


def _weighted_norm(values: np.ndarray, weights: np.ndarray) -> float:
    return float(np.sqrt(np.sum(weights[..., None] * values**2)))


def _relative(error: float, scale: float) -> float:
    return error / scale if scale > 0.0 else error


def metrics(recon: FieldLike, truth: FieldLike, margin: float = 0.1) -> ReconstructionMetrics:
    """Relative L2 and max errors over the cube and over [margin, 1 - margin]^3.

    Parity tags are ignored; only the sampled values are compared.
    """
    n = require_same_grid(recon, truth)
    if isinstance(recon, VectorField3) != isinstance(truth, VectorField3):
        raise TypeError("Cannot compare a scalar field with a vector field")
    diff = _values(recon) - _values(truth)
    reference = _values(truth)
    weights = volume_weights(n)
    inner = weights * interior_mask(n, margin)
    inside = interior_mask(n, margin)

    truth_norm = _weighted_norm(reference, weights)
    result = ReconstructionMetrics(
        relative_l2=_relative(_weighted_norm(diff, weights), truth_norm),
        max_abs=float(np.max(np.abs(diff))),
        relative_l2_interior=_relative(
            _weighted_norm(diff, inner), _weighted_norm(reference, inner)
        ),
        max_abs_interior=float(np.max(np.abs(diff[inside]))) if np.any(inside) else 0.0,
        truth_norm=truth_norm,
        margin=margin,
    )
    logger.debug(f"Metrics on n={n}: relative L2 {result.relative_l2:.3e}")
    return result


def relative_error(recon: FieldLike, truth: FieldLike) -> float:
    return metrics(recon, truth, margin=0.0).relative_l2


__all__ = ["ReconstructionMetrics", "metrics", "relative_error"]
