import csv
import json

import numpy as np
import pytest

from pilotwave.errors import ConfigurationError
from pilotwave.outputs import OutputWriter, format_value, jsonable, numerical_constants
from pilotwave.scenario import default_scenario


def test_floats_round_trip_through_text():
    for value in (0.1, 1.0 / 3.0, -2.5e-17, np.float64(np.pi)):
        assert float(format_value(value)) == value
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(True) == "1"
    assert format_value(np.int64(7)) == "7"


def test_jsonable_unwraps_numpy_and_complex():
    payload = jsonable({"z": 1 + 2j, "a": np.arange(3), "nan": float("nan"), "flag": np.bool_(True), 3: "x"})
    assert payload == {"z": [1.0, 2.0], "a": [0, 1, 2], "nan": None, "flag": True, "3": "x"}
    json.dumps(payload)


def test_csv_has_fixed_columns(tmp_path):
    writer = OutputWriter(tmp_path / "run")
    path = writer.write_csv("table.csv", ["t", "value"], [(0.0, 0.1), (0.5, 2)])
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows == [["t", "value"], ["0", "0.10000000000000001"], ["0.5", "2"]]
    assert writer.saved == ["table.csv"]
    with pytest.raises(ConfigurationError):
        writer.write_csv("bad.csv", ["t", "value"], [(0.0,)])


def test_manifest_is_sorted_and_complete(tmp_path):
    writer = OutputWriter(tmp_path)
    writer.write_json("result.json", {"b": 1, "a": 2})
    path = writer.write_manifest("evolve", default_scenario(), "completed", {"final_norm": 1.0},
                                 timestamp="2000-01-01T00:00:00+00:00")
    text = path.read_text(encoding="utf-8")
    manifest = json.loads(text)
    assert list(manifest) == sorted(manifest)
    assert manifest["artifacts"] == ["result.json"]
    assert manifest["seed"] == 0
    assert manifest["scenario"]["grid"]["points"] == 64
    assert manifest["numerical_constants"] == numerical_constants()
    assert set(manifest["versions"]) == {"pilotwave", "numpy", "scipy", "python"}


def test_plots_only_when_enabled(tmp_path):
    series = [("a", [0.0, 1.0, 2.0], [1.0, 0.5, 0.25])]
    assert OutputWriter(tmp_path / "off").line_plot("a.svg", "a", series) is None
    assert not (tmp_path / "off" / "a.svg").exists()
    writer = OutputWriter(tmp_path / "on", plots=True)
    svg = writer.line_plot("a.svg", "decay", series).read_text(encoding="utf-8")
    assert "<polyline" in svg or "<path" in svg
    heat = writer.heatmap("h.svg", "density", np.ones((3, 4)), (0.0, 1.0, 0.0, 2.0))
    assert heat.read_text(encoding="utf-8").count("<rect") >= 12
