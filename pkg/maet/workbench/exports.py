"""Figure-style exports: planar slices (PNG or CSV) and line profiles (CSV)."""

import json
import logging
from pathlib import Path
from typing import Literal, Optional, Sequence, Union

import numpy as np
import polars as pl
from matplotlib import image as mpimg
from pydantic import BaseModel, Field, model_validator
from scipy.ndimage import map_coordinates

from ..core.fields import ScalarField3, grid_coordinates

logger = logging.getLogger(__name__)

AXIS_NAMES = ("x1", "x2", "x3")


class PlaneSpec(BaseModel):
    """The plane x_{axis+1} = position."""

    axis: int = Field(ge=0, le=2)
    position: float

    @model_validator(mode="after")
    def validate_position(self) -> "PlaneSpec":
        if not 0.0 <= self.position <= 1.0:
            raise ValueError(
                f"Plane {AXIS_NAMES[self.axis]} = {self.position} lies outside [0, 1]"
            )
        return self

    @property
    def in_plane_axes(self) -> tuple[int, int]:
        return tuple(a for a in range(3) if a != self.axis)  # type: ignore[return-value]

    @classmethod
    def parse(cls, text: str) -> "PlaneSpec":
        """'x3=0.5' -> PlaneSpec(axis=2, position=0.5)."""
        name, _, value = text.replace(" ", "").partition("=")
        if name not in AXIS_NAMES or not value:
            raise ValueError(f"Plane must look like 'x3=0.5', got {text!r}")
        return cls(axis=AXIS_NAMES.index(name), position=float(value))


class LineSpec(BaseModel):
    """The line along x_{axis+1} with the other two coordinates fixed.

    `fixed` maps axis index to coordinate.
    """

    axis: int = Field(ge=0, le=2)
    fixed: dict[int, float]

    @model_validator(mode="after")
    def validate_fixed(self) -> "LineSpec":
        others = {a for a in range(3) if a != self.axis}
        if set(self.fixed) != others:
            raise ValueError(
                f"A line along {AXIS_NAMES[self.axis]} needs exactly the coordinates "
                f"{sorted(AXIS_NAMES[a] for a in others)}"
            )
        for a, value in self.fixed.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"Line coordinate {AXIS_NAMES[a]} = {value} lies outside [0, 1]")
        return self

    @classmethod
    def parse(cls, text: str) -> "LineSpec":
        """'x1=0.25,x3=0.5' -> the line along x2 through (0.25, ., 0.5)."""
        fixed = {}
        for part in text.replace(" ", "").split(","):
            name, _, value = part.partition("=")
            if name not in AXIS_NAMES or not value:
                raise ValueError(f"Line must look like 'x1=0.25,x3=0.5', got {text!r}")
            fixed[AXIS_NAMES.index(name)] = float(value)
        free = [a for a in range(3) if a not in fixed]
        if len(free) != 1:
            raise ValueError(f"Line needs two fixed coordinates, got {text!r}")
        return cls(axis=free[0], fixed=fixed)


def _index_coordinate(n: int, position: float) -> float:
    return position * (n - 1)


def slice_values(field: ScalarField3, plane: PlaneSpec) -> np.ndarray:
    """Trilinearly interpolated (n, n) section; rows follow the first in-plane axis."""
    n = field.n
    u, v = plane.in_plane_axes
    idx = np.arange(n, dtype=np.float64)
    coords = np.empty((3, n, n))
    coords[plane.axis] = _index_coordinate(n, plane.position)
    coords[u] = idx[:, None]
    coords[v] = idx[None, :]
    flat = map_coordinates(field.values, coords.reshape(3, -1), order=1, mode="nearest")
    return flat.reshape(n, n)


def profile_values(field: ScalarField3, line: LineSpec) -> tuple[np.ndarray, np.ndarray]:
    n = field.n
    coords = np.empty((3, n))
    coords[line.axis] = np.arange(n, dtype=np.float64)
    for a, value in line.fixed.items():
        coords[a] = _index_coordinate(n, value)
    return grid_coordinates(n), map_coordinates(field.values, coords, order=1, mode="nearest")


def export_slice(
    field: ScalarField3,
    plane: Union[PlaneSpec, str],
    path: Union[str, Path],
    fmt: Literal["png", "csv"] = "png",
    value_range: Optional[Sequence[float]] = None,
) -> list[Path]:
    """Write a section of `field` and return the files written.

    PNG output maps [vmin, vmax] linearly to gray levels (first in-plane
    axis horizontal, origin at the lower left) and records the mapping in
    a JSON sidecar. CSV output has one row per node: u, v, value.
    """
    if isinstance(plane, str):
        plane = PlaneSpec.parse(plane)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = slice_values(field, plane)
    u, v = plane.in_plane_axes

    if fmt == "csv":
        x = grid_coordinates(field.n)
        uu, vv = np.meshgrid(x, x, indexing="ij")
        pl.DataFrame(
            {
                AXIS_NAMES[u]: uu.ravel(),
                AXIS_NAMES[v]: vv.ravel(),
                "value": values.ravel(),
            }
        ).write_csv(path)
        logger.info(f"Exported slice {AXIS_NAMES[plane.axis]}={plane.position} to {path}")
        return [path]
    if fmt != "png":
        raise ValueError(f"Unknown slice format: {fmt}")

    if value_range is None:
        vmin, vmax = float(values.min()), float(values.max())
    else:
        vmin, vmax = (float(x) for x in value_range)
    if vmax < vmin:
        raise ValueError(f"Empty value range [{vmin}, {vmax}]")
    mpimg.imsave(path, values.T, cmap="gray", vmin=vmin, vmax=vmax, origin="lower")
    sidecar = path.with_suffix(".json")
    sidecar.write_text(
        json.dumps(
            {
                "plane": {"axis": AXIS_NAMES[plane.axis], "position": plane.position},
                "horizontal": AXIS_NAMES[u],
                "vertical": AXIS_NAMES[v],
                "colormap": "gray",
                "vmin": vmin,
                "vmax": vmax,
                "n": field.n,
            },
            indent=2,
            sort_keys=True,
        )
    )
    logger.info(f"Exported slice {AXIS_NAMES[plane.axis]}={plane.position} to {path}")
    return [path, sidecar]


def profile_frame(field: ScalarField3, line: Union[LineSpec, str]) -> pl.DataFrame:
    if isinstance(line, str):
        line = LineSpec.parse(line)
    coordinate, values = profile_values(field, line)
    return pl.DataFrame({AXIS_NAMES[line.axis]: coordinate, "value": values})


def export_profile(
    field: ScalarField3, line: Union[LineSpec, str], path: Union[str, Path]
) -> Path:
    """CSV of (coordinate, value) rows along the line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    profile_frame(field, line).write_csv(path)
    logger.info(f"Exported profile to {path}")
    return path


__all__ = [
    "AXIS_NAMES",
    "PlaneSpec",
    "LineSpec",
    "slice_values",
    "profile_values",
    "export_slice",
    "profile_frame",
    "export_profile",
]
