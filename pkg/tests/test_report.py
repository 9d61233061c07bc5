import json
import math
from dataclasses import dataclass, field

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twofold.report import dumps, to_plain, write_csv, write_json
from twofold.sdi import Divergent


@dataclass(frozen=True)
class Item:
    a: float
    b: tuple = ()
    hidden: np.ndarray = field(default=None, repr=False)


def test_to_plain():
    out = to_plain({"x": Item(1.0, (np.float64(2.5), np.int64(3)), np.zeros(3)), 4: np.array([True, False])})
    assert out == {"x": {"a": 1.0, "b": [2.5, 3]}, "4": [True, False]}
    assert type(out["x"]["b"][1]) is int
    assert to_plain(Divergent(-1, (0.5,))) == {"divergent": True, "sign": -1, "zeros": [0.5]}


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_floats_round_trip_exactly(v):
    assert json.loads(dumps({"v": v}))["v"] == v


def test_float_formatting():
    text = dumps({"i": 3, "f": 3.0, "nan": math.nan, "inf": math.inf, "ninf": -math.inf, "b": True})
    d = json.loads(text)
    assert d == {"i": 3, "f": 3.0, "nan": None, "inf": "inf", "ninf": "-inf", "b": True}
    assert '"f": 3.0' in text and '"i": 3' in text


def test_layout_is_stable():
    obj = {"z": [1.0, 2.0], "a": {"k": []}, "l": [{"q": 1}]}
    assert dumps(obj) == dumps(json.loads(dumps(obj)))
    assert list(json.loads(dumps(obj))) == ["z", "a", "l"]  # insertion order, not sorted


def test_writers(tmp_path):
    write_json(tmp_path / "r.json", {"x": 0.1})
    assert (tmp_path / "r.json").read_text() == '{\n  "x": 0.10000000000000001\n}\n'
    write_csv(tmp_path / "r.csv", ("a", "b"), [(0.1, "s"), (np.float64(2.0), 3)])
    assert (tmp_path / "r.csv").read_text() == "a,b\n0.10000000000000001,s\n2,3\n"
