"""Binary field files: one scalar component per file.

Layout (little-endian): magic b"MAETF1\\0\\0", u32 n, three u8 parity codes
(0 even, 1 odd), one pad byte, then n^3 float64 values with x1 varying
fastest.
"""

import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from .enums import Parity
from .fields import ScalarField3, VectorField3

logger = logging.getLogger(__name__)

FIELD_MAGIC = b"MAETF1\x00\x00"
HEADER = struct.Struct("<8sI3Bx")

PathLike = Union[str, Path]


def encode_field(field: ScalarField3) -> bytes:
    header = HEADER.pack(FIELD_MAGIC, field.n, *(p.code for p in field.parity))
    # x1 fastest is Fortran order for an (x1, x2, x3)-indexed array
    body = np.asarray(field.values, dtype="<f8").ravel(order="F").tobytes()
    return header + body


def decode_field(data: bytes) -> ScalarField3:
    if len(data) < HEADER.size:
        raise ValueError(f"Field file too short: {len(data)} bytes")
    magic, n, *codes = HEADER.unpack_from(data)
    if magic != FIELD_MAGIC:
        raise ValueError(f"Not a field file (magic {magic!r})")
    expected = HEADER.size + 8 * n**3
    if len(data) != expected:
        raise ValueError(f"Field file for n={n} should be {expected} bytes, got {len(data)}")
    values = np.frombuffer(data, dtype="<f8", offset=HEADER.size).reshape(
        (n, n, n), order="F"
    )
    return ScalarField3(
        values=values, parity=tuple(Parity.from_code(c) for c in codes)
    )


def write_field(field: ScalarField3, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_field(field))
    logger.debug(f"Wrote field n={field.n} to {path}")
    return path


def read_field(path: PathLike) -> ScalarField3:
    return decode_field(Path(path).read_bytes())


def vector_paths(stem: PathLike) -> list[Path]:
    """File names used for the three components of a vector field."""
    stem = Path(stem)
    return [stem.with_name(f"{stem.name}_{axis}.field") for axis in ("x", "y", "z")]


def write_vector_field(field: VectorField3, stem: PathLike) -> list[Path]:
    return [write_field(c, p) for c, p in zip(field, vector_paths(stem))]


def read_vector_field(stem: PathLike) -> VectorField3:
    return VectorField3.from_components([read_field(p) for p in vector_paths(stem)])


__all__ = [
    "FIELD_MAGIC",
    "encode_field",
    "decode_field",
    "write_field",
    "read_field",
    "vector_paths",
    "write_vector_field",
    "read_vector_field",
]
