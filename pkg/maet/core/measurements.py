"""Measurement sets: boundary time series of the nine functional families."""

import json
import logging
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from .enums import Face
from .models import AcquisitionMetadata

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
SERIES_LAYOUT = "face-major, face-point-major (row-major over the two tangential axes), time-minor"


def series_file_name(k: int, j: int) -> str:
    return f"series_k{k}_j{j}.bin"


class MeasurementSet(BaseModel):
    """Series M[k-1, j-1, face, point, sample] plus acquisition metadata.

    `point` enumerates the m x m face grid row-major over the face's
    tangential axes in increasing axis order.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    series: np.ndarray
    metadata: AcquisitionMetadata

    @field_validator("series", mode="before")
    @classmethod
    def validate_series(cls, value: Any) -> np.ndarray:
        array = np.array(value, dtype=np.float64)
        if array.ndim != 5 or array.shape[:3] != (3, 3, 6):
            raise ValueError(f"Series must have shape (3, 3, 6, m*m, n_t), got {array.shape}")
        if not np.all(np.isfinite(array)):
            raise ValueError("Series values must be finite")
        array.setflags(write=False)
        return array

    @model_validator(mode="after")
    def validate_shape(self) -> "MeasurementSet":
        expected = (3, 3, 6, self.metadata.m**2, self.metadata.n_t)
        if self.series.shape != expected:
            raise ValueError(
                f"Series shape {self.series.shape} does not match metadata {expected}"
            )
        return self

    @property
    def m(self) -> int:
        return self.metadata.m

    @property
    def n_t(self) -> int:
        return self.metadata.n_t

    @property
    def dt(self) -> float:
        return self.metadata.dt

    @property
    def times(self) -> np.ndarray:
        return self.metadata.times

    def family(self, k: int, j: int) -> np.ndarray:
        """Series of M_{I_k, B^(j)}, shape (6, m*m, n_t); k and j are 1-based."""
        _check_index(k, "k")
        _check_index(j, "j")
        return self.series[k - 1, j - 1]

    def face_grid(self, k: int, j: int, face: Face) -> np.ndarray:
        """Series on one face reshaped to (m, m, n_t)."""
        return self.family(k, j)[Face(face).value].reshape(self.m, self.m, self.n_t)

    def with_series(
        self, series: np.ndarray, metadata: Optional[AcquisitionMetadata] = None
    ) -> "MeasurementSet":
        return MeasurementSet(series=series, metadata=metadata or self.metadata)

    def __add__(self, other: "MeasurementSet") -> "MeasurementSet":
        if other.series.shape != self.series.shape:
            raise ValueError(f"Shape mismatch: {self.series.shape} vs {other.series.shape}")
        return self.with_series(self.series + other.series)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.series))) if self.series.size else 0.0

    # Persistence

    def manifest(self) -> dict[str, Any]:
        return {
            "format": "maet-measurements/1",
            "metadata": self.metadata.model_dump(mode="json"),
            "dtype": "<f8",
            "shape_per_file": [6, self.m * self.m, self.n_t],
            "layout": SERIES_LAYOUT,
            "faces": [face.name for face in Face],
            "files": {
                f"{k},{j}": series_file_name(k, j) for k in range(1, 4) for j in range(1, 4)
            },
        }

    def save(self, directory: Union[str, Path]) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        for k in range(1, 4):
            for j in range(1, 4):
                path = directory / series_file_name(k, j)
                path.write_bytes(np.ascontiguousarray(self.family(k, j), dtype="<f8").tobytes())
                written.append(path)
        manifest_path = directory / MANIFEST_NAME
        manifest_path.write_text(json.dumps(self.manifest(), indent=2, sort_keys=True))
        written.append(manifest_path)
        logger.info(f"Saved measurement set (m={self.m}, n_t={self.n_t}) to {directory}")
        return written

    @classmethod
    def load(cls, directory: Union[str, Path]) -> "MeasurementSet":
        directory = Path(directory)
        manifest_path = directory / MANIFEST_NAME
        if not manifest_path.exists():
            raise FileNotFoundError(f"No {MANIFEST_NAME} in {directory}")
        manifest = json.loads(manifest_path.read_text())
        metadata = AcquisitionMetadata.model_validate(manifest["metadata"])
        shape = (6, metadata.m**2, metadata.n_t)
        series = np.empty((3, 3) + shape)
        for k in range(1, 4):
            for j in range(1, 4):
                path = directory / manifest["files"][f"{k},{j}"]
                data = np.frombuffer(path.read_bytes(), dtype="<f8")
                if data.size != np.prod(shape):
                    raise ValueError(
                        f"{path.name} holds {data.size} values, expected {int(np.prod(shape))}"
                    )
                series[k - 1, j - 1] = data.reshape(shape)
        return cls(series=series, metadata=metadata)


def _check_index(value: int, name: str) -> None:
    if value not in (1, 2, 3):
        raise ValueError(f"{name} must be 1, 2 or 3, got {value}")


__all__ = ["MANIFEST_NAME", "series_file_name", "MeasurementSet"]
