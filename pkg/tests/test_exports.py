import json

import numpy as np
import polars as pl
import pytest
from matplotlib import image as mpimg

from maet.core.fields import ScalarField3
from maet.workbench.exports import (
    LineSpec,
    PlaneSpec,
    export_profile,
    export_slice,
    profile_frame,
    slice_values,
)


@pytest.fixture
def ramp():
    """f = x1 + 2 x2 + 3 x3, exact under trilinear interpolation."""
    return ScalarField3.from_function(lambda x, y, z: x + 2 * y + 3 * z, 9)


def test_plane_and_line_parsing():
    plane = PlaneSpec.parse("x3 = 0.5")
    assert plane.axis == 2 and plane.position == 0.5
    assert plane.in_plane_axes == (0, 1)
    line = LineSpec.parse("x1=0.25,x3=0.5")
    assert line.axis == 1 and line.fixed == {0: 0.25, 2: 0.5}
    for bad in ("x4=0.5", "x3", "x3=1.5"):
        with pytest.raises(ValueError):
            PlaneSpec.parse(bad)
    for bad in ("x1=0.25", "x1=0.2,x2=0.3,x3=0.4", "x1=0.2,x3=2"):
        with pytest.raises(ValueError):
            LineSpec.parse(bad)


def test_slice_between_nodes_interpolates(ramp):
    values = slice_values(ramp, PlaneSpec(axis=2, position=0.3))
    x = np.linspace(0.0, 1.0, 9)
    assert np.allclose(values, x[:, None] + 2 * x[None, :] + 0.9)


def test_png_slice_has_sidecar(tmp_path, ramp):
    written = export_slice(ramp, "x1=0.5", tmp_path / "figs" / "slice.png", value_range=(0, 6))
    png, sidecar = written
    assert png.exists()
    meta = json.loads(sidecar.read_text())
    assert meta["horizontal"] == "x2" and meta["vertical"] == "x3"
    assert meta["vmin"] == 0.0 and meta["vmax"] == 6.0
    image = mpimg.imread(png)
    assert image.shape[:2] == (9, 9)


def test_csv_slice(tmp_path, ramp):
    (path,) = export_slice(ramp, "x2=0.0", tmp_path / "slice.csv", fmt="csv")
    frame = pl.read_csv(path)
    assert frame.columns == ["x1", "x3", "value"]
    assert frame.height == 81
    assert np.allclose(frame["value"], frame["x1"] + 3 * frame["x3"])


def test_slice_rejects_bad_requests(tmp_path, ramp):
    with pytest.raises(ValueError):
        export_slice(ramp, "x1=0.5", tmp_path / "s.gif", fmt="gif")
    with pytest.raises(ValueError):
        export_slice(ramp, "x1=0.5", tmp_path / "s.png", value_range=(1.0, 0.0))


def test_profile_export(tmp_path, ramp):
    frame = profile_frame(ramp, "x1=0.25,x3=0.5")
    assert frame.columns == ["x2", "value"]
    assert np.allclose(frame["value"], 0.25 + 2 * frame["x2"] + 1.5)
    path = export_profile(ramp, LineSpec(axis=0, fixed={1: 0.5, 2: 0.5}), tmp_path / "p.csv")
    assert pl.read_csv(path).height == 9
