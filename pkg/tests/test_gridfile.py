import json

import numpy as np
import pytest

from monoreg.errors import InputFormatError
from monoreg.grid import Box, GridFunction, GridSpec, dyadic_grid, equidistant_grid
from monoreg.gridfile import grid_csv, read_grid, sidecar_path, write_grid
from monoreg.order import Signature


def _write(tmp_path, csv_text, meta, name="data.csv"):
    path = tmp_path / name
    path.write_text(csv_text)
    (tmp_path / name.replace(".csv", ".json")).write_text(json.dumps(meta))
    return path


LINE = {"box": {"lo": [0], "hi": [1]}, "level": 2}


def test_sidecar_path():
    assert sidecar_path("runs/fit.csv") == "runs/fit.json"
    assert sidecar_path("plain") == "plain.json"


def test_read_level_sidecar(tmp_path):
    path = _write(tmp_path, "i1,value\n0,3\n1,1\n2,2\n3,4\n", LINE | {"signature": "+1"})
    data = read_grid(path)
    assert data.values.values.tolist() == [3.0, 1.0, 2.0, 4.0]
    assert data.values.grid.level == 2
    assert data.weights is None
    assert data.signature == Signature((1,))


def test_read_shape_sidecar_with_weights(tmp_path):
    rows = "i1,i2,value,weight\n" + "".join(
        f"{i},{j},{i - j},{1 + i}\n" for i in range(2) for j in range(3)
    )
    path = _write(tmp_path, rows, {"box": {"lo": [0, 0], "hi": [2, 3]}, "shape": [2, 3]})
    data = read_grid(path)
    assert data.values.grid.shape == (2, 3)
    assert data.values.grid.equidistant
    assert data.weights.values.tolist() == [[1, 1, 1], [2, 2, 2]]
    assert data.signature is None


def test_read_breakpoint_sidecar(tmp_path):
    meta = {"box": {"lo": [0], "hi": [1]}, "breakpoints": [[0, 0.25, 0.5, 0.75, 1]]}
    data = read_grid(_write(tmp_path, "i1,value\n3,0\n2,0\n1,0\n0,0\n", meta))
    assert data.values.grid.level == 2
    uneven = {"box": {"lo": [0], "hi": [1]}, "breakpoints": [[0, 0.2, 1]]}
    data = read_grid(_write(tmp_path, "i1,value\n0,1\n1,2\n", uneven, name="uneven.csv"))
    assert not data.values.grid.equidistant


def test_round_trip_is_bit_exact(tmp_path, rng):
    grid = equidistant_grid(Box((0.0, -1.0), (1.0, 2.0)), (3, 4))
    f = GridFunction(grid, rng.normal(size=grid.shape) / 3.0)
    w = GridFunction(grid, rng.uniform(0.5, 2.0, size=grid.shape))
    path = tmp_path / "out" / "fit.csv"
    write_grid(path, f, w, Signature((1, -1)))
    back = read_grid(path)
    assert np.array_equal(back.values.values, f.values)
    assert np.array_equal(back.weights.values, w.values)
    assert back.values.grid.same_as(grid)
    assert back.signature == Signature((1, -1))


def test_grid_csv_layout():
    f = GridFunction(dyadic_grid(Box.unit(1), 1), [0.1, 2.0])
    assert grid_csv(f) == "i1,value\n0,0.10000000000000001\n1,2\n"


@pytest.mark.parametrize("text,line,fragment", [
    ("i1,value\n0,3\n1,1\n2,2\n", None, "missing value for index (3,)"),
    ("i,value\n0,3\n", 1, "header"),
    ("i1,value\n0,3\n0,1\n", 3, "duplicate"),
    ("i1,value\n0,3\nx,1\n", 3, "integers"),
    ("i1,value\n0,3\n9,1\n", 3, "outside"),
    ("i1,value\n0,3\n1,abc\n", 3, "bad number"),
    ("i1,value\n0,3\n1,inf\n", 3, "finite"),
    ("i1,value\n0,3,7\n", 2, "fields"),
])
def test_malformed_rows(tmp_path, text, line, fragment):
    with pytest.raises(InputFormatError) as info:
        read_grid(_write(tmp_path, text, LINE))
    assert info.value.line == line
    assert fragment in str(info.value)


def test_nonpositive_weight(tmp_path):
    meta = {"box": {"lo": [0], "hi": [1]}, "level": 1}
    with pytest.raises(InputFormatError, match="strictly positive"):
        read_grid(_write(tmp_path, "i1,value,weight\n0,1,1\n1,2,0\n", meta))


@pytest.mark.parametrize("meta,fragment", [
    ({"level": 1}, "box"),
    ({"box": {"lo": [0], "hi": [1]}}, "breakpoints, level or shape"),
    ({"box": {"lo": [1], "hi": [0]}, "level": 1}, ""),
    ({"box": {"lo": [0], "hi": [1]}, "level": 1, "signature": "+1,up"}, "signature"),
])
def test_bad_sidecar(tmp_path, meta, fragment):
    with pytest.raises(InputFormatError) as info:
        read_grid(_write(tmp_path, "i1,value\n0,1\n1,2\n", meta))
    assert fragment in str(info.value)
    assert info.value.path.endswith("data.json")


def test_sidecar_signature_length_is_left_to_the_caller(tmp_path):
    meta = {"box": {"lo": [0], "hi": [1]}, "level": 1, "signature": "+1,+1"}
    data = read_grid(_write(tmp_path, "i1,value\n0,1\n1,2\n", meta))
    assert data.signature == Signature((1, 1))
    assert data.values.grid.dim == 1


def test_missing_sidecar(tmp_path):
    path = tmp_path / "lonely.csv"
    path.write_text("i1,value\n0,1\n")
    with pytest.raises(InputFormatError, match="missing JSON sidecar"):
        read_grid(path)


def test_sidecar_syntax_error_has_line(tmp_path):
    (tmp_path / "data.json").write_text('{\n  "box": ,\n}')
    (tmp_path / "data.csv").write_text("i1,value\n0,1\n")
    with pytest.raises(InputFormatError) as info:
        read_grid(tmp_path / "data.csv")
    assert info.value.line == 2


def test_write_grid_needs_shared_grid(tmp_path):
    from monoreg.errors import MonoregError
    f = GridFunction(dyadic_grid(Box.unit(1), 1), [1.0, 2.0])
    w = GridFunction(GridSpec(Box.unit(1), (np.array([0.0, 0.2, 1.0]),)), [1.0, 1.0])
    with pytest.raises(MonoregError):
        write_grid(tmp_path / "x.csv", f, w)
