import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Optional, Union

import polars as pl
from pydantic import BaseModel

from .fields import ScalarField3, VectorField3
from .io import write_field, write_vector_field
from .measurements import MeasurementSet

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
TIMINGS_NAME = "timings.json"


class ArtifactRecord(BaseModel):
    path: str
    kind: str
    sha256: str


def sha256_file(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class ArtifactStore:
    """Writes every artifact of a run below one directory and keeps the manifest.

    The manifest lists each artifact with its SHA-256. Wall-clock timings
    go to a separate, unhashed file so that identical runs produce
    identical manifests.
    """

    def __init__(self, root: Union[str, Path], config_snapshot: Optional[dict[str, Any]] = None):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.config_snapshot = config_snapshot or {}
        self.artifacts: list[ArtifactRecord] = []
        self.timings: dict[str, float] = {}

    def path_for(self, relative: str) -> Path:
        path = self.root / relative
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def record(self, path: Union[str, Path], kind: str) -> ArtifactRecord:
        """Hash an already written file and add it to the manifest."""
        path = Path(path)
        relative = path.relative_to(self.root).as_posix()
        entry = ArtifactRecord(path=relative, kind=kind, sha256=sha256_file(path))
        self.artifacts = [a for a in self.artifacts if a.path != relative] + [entry]
        logger.debug(f"Recorded {kind} artifact {relative}")
        return entry

    def save_field(self, field: ScalarField3, name: str) -> Path:
        path = write_field(field, self.path_for(f"{name}.field"))
        self.record(path, "field")
        return path

    def save_vector_field(self, field: VectorField3, name: str) -> list[Path]:
        paths = write_vector_field(field, self.path_for(name))
        for path in paths:
            self.record(path, "field")
        return paths

    def save_measurements(self, data: MeasurementSet, name: str) -> Path:
        directory = self.root / name
        for path in data.save(directory):
            self.record(path, "measurements")
        return directory

    def save_json(self, payload: Any, name: str, kind: str = "report") -> Path:
        path = self.path_for(f"{name}.json")
        if isinstance(payload, BaseModel):
            payload = payload.model_dump(mode="json")
        path.write_text(json.dumps(payload, indent=2, sort_keys=True))
        self.record(path, kind)
        return path

    def save_table(self, frame: pl.DataFrame, name: str, kind: str = "table") -> Path:
        path = self.path_for(f"{name}.csv")
        frame.write_csv(path)
        self.record(path, kind)
        return path

    def add_timing(self, stage: str, seconds: float) -> None:
        self.timings[stage] = seconds

    def manifest(self) -> dict[str, Any]:
        return {
            "config": self.config_snapshot,
            "artifacts": [a.model_dump() for a in self.artifacts],
            "timings_file": TIMINGS_NAME,
        }

    def write_manifest(self) -> Path:
        (self.root / TIMINGS_NAME).write_text(json.dumps(self.timings, indent=2, sort_keys=True))
        path = self.root / MANIFEST_NAME
        path.write_text(json.dumps(self.manifest(), indent=2, sort_keys=True))
        logger.info(f"Wrote manifest with {len(self.artifacts)} artifacts to {path}")
        return path

    def verify(self) -> list[str]:
        """Paths whose current content no longer matches the recorded hash."""
        return [
            a.path for a in self.artifacts if sha256_file(self.root / a.path) != a.sha256
        ]
