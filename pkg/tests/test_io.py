import numpy as np
import pytest

from maet.core.fields import CURL_PARITY, ScalarField3, VectorField3
from maet.core.io import (
    FIELD_MAGIC,
    HEADER,
    decode_field,
    encode_field,
    read_field,
    read_vector_field,
    vector_paths,
    write_field,
    write_vector_field,
)
from tests.conftest import random_field


def test_header_layout():
    field = ScalarField3.zeros(5, ("odd", "even", "odd"))
    data = encode_field(field)
    assert HEADER.size == 16
    assert data[:8] == FIELD_MAGIC
    assert int.from_bytes(data[8:12], "little") == 5
    assert list(data[12:15]) == [1, 0, 1]
    assert len(data) == 16 + 8 * 125


def test_x1_varies_fastest():
    values = np.zeros((3, 3, 3))
    values[1, 0, 0] = 7.0
    data = encode_field(ScalarField3(values=values))
    body = np.frombuffer(data, dtype="<f8", offset=16)
    assert body[1] == 7.0


def test_file_round_trip_keeps_parity(tmp_path, rng):
    field = random_field(rng, 7, ("even", "odd", "odd"))
    path = write_field(field, tmp_path / "sub" / "f.field")
    back = read_field(path)
    assert back.parity == field.parity
    assert np.array_equal(back.values, field.values)


def test_decode_rejects_bad_magic_and_length():
    data = bytearray(encode_field(ScalarField3.zeros(3)))
    with pytest.raises(ValueError, match="should be"):
        decode_field(bytes(data[:-8]))
    data[0:1] = b"X"
    with pytest.raises(ValueError, match="Not a field file"):
        decode_field(bytes(data))
    with pytest.raises(ValueError, match="too short"):
        decode_field(b"MAET")


def test_vector_field_files(tmp_path, rng):
    field = VectorField3.from_components([random_field(rng, 5, p) for p in CURL_PARITY])
    paths = write_vector_field(field, tmp_path / "curl_k1")
    assert [p.name for p in paths] == ["curl_k1_x.field", "curl_k1_y.field", "curl_k1_z.field"]
    assert vector_paths(tmp_path / "curl_k1") == paths
    back = read_vector_field(tmp_path / "curl_k1")
    assert back.parity_signature == CURL_PARITY
    assert np.array_equal(back.stack(), field.stack())
