import json
import math

import numpy as np
import pytest

from monoreg.report import csv_text, dumps, format_float, write_csv, write_json, write_text


@pytest.mark.parametrize("x,text", [
    (0.1, "0.10000000000000001"),
    (2.0, "2"),
    (1 / 3, "0.33333333333333331"),
    (math.nan, "NaN"),
    (math.inf, "Infinity"),
    (-math.inf, "-Infinity"),
])
def test_format_float(x, text):
    assert format_float(x) == text


def test_format_float_round_trips(rng):
    for x in rng.normal(size=200) * 10.0 ** rng.integers(-8, 8, size=200):
        assert float(format_float(x)) == x


def test_dumps_keeps_key_order_and_flat_lists():
    text = dumps({"z": 1, "a": [1.5, 2.0], "m": {"b": None, "a": True}, "rows": [[1, 2], [3, 4]]})
    assert text == (
        '{\n'
        '  "z": 1,\n'
        '  "a": [1.5, 2],\n'
        '  "m": {\n'
        '    "b": null,\n'
        '    "a": true\n'
        '  },\n'
        '  "rows": [\n'
        '    [1, 2],\n'
        '    [3, 4]\n'
        '  ]\n'
        '}\n'
    )
    assert list(json.loads(text)) == ["z", "a", "m", "rows"]


def test_dumps_numpy_values():
    text = dumps({"n": np.int64(3), "x": np.float64(0.1), "ok": np.bool_(False), "v": np.array([1.0, 0.5])})
    assert json.loads(text) == {"n": 3, "x": 0.1, "ok": False, "v": [1.0, 0.5]}


def test_dumps_empty_containers_and_errors():
    assert dumps({"a": [], "b": {}}) == '{\n  "a": [],\n  "b": {}\n}\n'
    with pytest.raises(TypeError):
        dumps({"x": object()})


def test_csv_text():
    text = csv_text(("level", "bound", "diff"), [(0, 0.25, None), (1, 0.1, 0.5)])
    assert text == "level,bound,diff\n0,0.25,\n1,0.10000000000000001,0.5\n"


def test_writes_are_atomic_and_create_directories(tmp_path):
    target = tmp_path / "deep" / "dir" / "report.json"
    write_json(target, {"a": 1})
    assert target.read_text() == '{\n  "a": 1\n}\n'
    write_text(target, "replaced\n")
    assert target.read_text() == "replaced\n"
    write_csv(tmp_path / "t.csv", ["a"], [[1]])
    assert (tmp_path / "t.csv").read_text() == "a\n1\n"
    assert sorted(p.name for p in target.parent.iterdir()) == ["report.json"]
