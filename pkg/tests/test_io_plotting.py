import hashlib
import json

import numpy as np
import pytest

from nucleate.io import RunManifest, format_value, read_csv, sha256_file, write_csv, write_json
from nucleate.plotting import emit_plot_script


def test_float_format_round_trips():
    for v in (0.1, 1 / 3, 1e-300, 123456789.123456789, -2.5e17):
        assert float(format_value(v)) == v
    assert format_value(np.int64(4)) == "4"
    assert format_value(True) == "1"
    assert format_value(float("nan")) == "nan"


def test_csv_layout(tmp_path):
    p = write_csv(tmp_path / "a.csv", ("x", "y"), [(0.1, 2), (np.float64(1 / 3), np.int32(5))])
    assert p.read_bytes() == b"x,y\n0.10000000000000001,2\n0.33333333333333331,5\n"
    header, rows = read_csv(p)
    assert header == ["x", "y"] and len(rows) == 2


def test_manifest_records_digests(tmp_path):
    p = write_csv(tmp_path / "a.csv", ("x",), [(1.0,)])
    m = RunManifest("demo", {"b": 1, "a": None}, 7)
    m.add_output(p)
    out = m.write(tmp_path)
    data = json.loads(out.read_text())
    assert data["outputs"]["a.csv"] == hashlib.sha256(p.read_bytes()).hexdigest() == sha256_file(p)
    assert data["parameters"] == {"a": None, "b": 1}
    assert {"numpy", "scipy", "numba", "nucleate", "python"} <= set(data["versions"])
    # keys are sorted
    assert list(data) == sorted(data)


def test_json_handles_arrays(tmp_path):
    p = write_json(tmp_path / "s.json", {"v": np.arange(3), "x": np.float64(0.5)})
    assert json.loads(p.read_text()) == {"v": [0, 1, 2], "x": 0.5}


def test_histogram_script(tmp_path):
    p = write_csv(tmp_path / "h.csv", ("bin_left", "bin_right", "bin_center", "density", "phi0"),
                  [(0, 0.5, 0.25, 0.9, 1.0), (0.5, 1, 0.75, 1.1, 1.0)])
    text = emit_plot_script(p, "histogram")
    assert "with boxes" in text and "using 3:4" in text and "using 3:5" in text


def test_ecdf_script(tmp_path):
    p = write_csv(tmp_path / "e.csv", ("x", "ecdf", "G"), [(0.5, 0.3, 0.31)])
    assert "with steps" in emit_plot_script(p, "ecdf")


def test_missing_column_named(tmp_path):
    p = write_csv(tmp_path / "e.csv", ("x", "ecdf"), [(0.5, 0.3)])
    with pytest.raises(ValueError, match="'G'"):
        emit_plot_script(p, "ecdf")


def test_empty_dataset_names_column(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    with pytest.raises(ValueError, match="'x'"):
        emit_plot_script(p, "gaplaw")


def test_unknown_kind(tmp_path):
    p = write_csv(tmp_path / "e.csv", ("x",), [(1,)])
    with pytest.raises(ValueError):
        emit_plot_script(p, "pie")
