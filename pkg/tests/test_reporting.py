import json

import numpy as np
import pandas as pd
import pytest

from epdwave.reporting import CsvSink, format_value, reference_slope, render_line_chart, write_summary


def test_format_value():
    assert format_value(0.1) == "0.1"
    assert format_value(np.float64(1 / 3)) == repr(1 / 3)
    assert format_value(np.int64(7)) == "7"
    assert format_value(True) == "true"
    assert format_value("converged") == "converged"


def test_csv_sink_writes_rows_incrementally(tmp_path):
    path = tmp_path / "out" / "decay.csv"
    sink = CsvSink(path, ["t", "value", "status"])
    assert path.read_text() == "t,value,status\n"
    sink.write({"t": 1.0, "value": 1 / 3, "status": "ok"})
    sink.write({"t": 2.5, "value": 1e-300, "status": "ok", "extra": 4})
    raw = path.read_bytes()
    assert b"\r\n" not in raw
    lines = raw.decode().splitlines()
    assert lines[1] == f"1.0,{repr(1 / 3)},ok"
    assert lines[2] == "2.5,1e-300,ok"
    assert sink.rows == 2
    back = pd.read_csv(path, float_precision="round_trip")
    assert back["value"].iloc[0] == 1 / 3


def test_csv_sink_missing_column(tmp_path):
    sink = CsvSink(tmp_path / "x.csv", ["a", "b"])
    with pytest.raises(KeyError):
        sink.write({"a": 1})


def test_summary_json(tmp_path):
    path = tmp_path / "summary.json"
    write_summary(path, {"fit": np.float64(-0.5), "times": np.array([1.0, 2.0])})
    data = json.loads(path.read_text())
    assert data["fit"] == -0.5
    assert data["times"] == [1.0, 2.0]
    assert "version" in data


def test_line_chart(tmp_path):
    t = np.geomspace(1, 50, 20)
    out = render_line_chart(
        tmp_path / "decay.svg",
        {"Z12": (t, t**-0.5), "ref t^-1/2": (t, reference_slope(t, 1.0, -0.5))},
        title="decay <generic>",
    )
    text = out.read_text()
    assert text.startswith("<svg")
    assert text.count("<polyline") == 2
    assert "&lt;generic&gt;" in text


def test_line_chart_with_nothing_to_draw(tmp_path):
    assert render_line_chart(tmp_path / "empty.svg", {"zero": ([1, 2], [0, 0])}, title="x") is None
    assert not (tmp_path / "empty.svg").exists()


def test_reference_slope():
    np.testing.assert_allclose(reference_slope([2.0, 4.0, 8.0], 3.0, -1.0), [3.0, 1.5, 0.75])
