import json

import pytest

from abcdpiml.report import dumps_json, fmt, ml_table, ordered_kinds, piml_table, predictions_csv
from abcdpiml.timeseries import MonthKey

# Published comparison rows, used purely as formatter inputs.
TABLE2 = [
    ("LSTM", 40.719, -4.841, 0.636),
    ("LASSO", 43.219, -15.048, 0.586),
    ("Ridge", 43.219, -15.05, 0.585),
    ("SVR", 45.157, 4.470, 0.548),
    ("GPR", 41.415, -4.733, 0.619),
]
TABLE3 = [
    ("LSTM", 11.654, 1.889, 0.768, 36.778, -23.694, 0.703),
    ("LASSO", 16.940, -1.746, 0.510, 40.031, -21.971, 0.648),
    ("Ridge", 16.940, -1.749, 0.510, 40.217, -21.830, 0.645),
    ("SVR", 14.489, 1.024, 0.642, 59.632, 53.967, 0.219),
    ("GPR", 14.725, 1.817, 0.630, 43.819, -13.150, 0.578),
]


def m(rmse, pbias, nse):
    return {"rmse": rmse, "pbias": pbias, "nse": nse}


def render_table2():
    return ml_table((name, m(*vals)) for name, *vals in TABLE2)


def test_table2_layout(data_dir):
    assert render_table2() == (data_dir / "table2_layout.md").read_text(encoding="utf-8")


def test_table3_layout(data_dir):
    rendered = piml_table((name, m(*vals[:3]), m(*vals[3:])) for name, *vals in TABLE3)
    assert rendered == (data_dir / "table3_layout.md").read_text(encoding="utf-8")


@pytest.mark.parametrize("value, text", [(-15.05, "-15.050"), (0.0005, "0.001"), (1.0, "1.000"), (-0.0, "-0.000")])
def test_fmt(value, text):
    assert fmt(value) == text


def test_row_order():
    assert ordered_kinds(["gpr", "ridge", "lasso"]) == ["lasso", "ridge", "gpr"]


def test_json_is_stable_and_strict():
    assert dumps_json({"b": 1, "a": [1.5]}) == '{\n  "a": [\n    1.5\n  ],\n  "b": 1\n}\n'
    with pytest.raises(ValueError):
        dumps_json({"x": float("nan")})
    assert json.loads(dumps_json({"x": 0.1 + 0.2}))["x"] == 0.1 + 0.2


def test_predictions_csv():
    keys = [MonthKey(2009, 1), MonthKey(2009, 2)]
    assert predictions_csv(keys, [1.0, 2.5], [0.1, 3]) == "date,observed,predicted\n2009-01,1.0,0.1\n2009-02,2.5,3.0\n"
