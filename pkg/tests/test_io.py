import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bbmfem import io
from bbmfem.diagnostics import ErrorReport, ErrorRow
from bbmfem.experiments import run_solitary_propagation
from bbmfem.waves import petviashvili_solve


@given(v=st.floats(allow_nan=False))
def test_float_format_round_trip(v):
    assert io.parse_value(io.format_value(v)) == v


def test_format_special_values():
    assert io.format_value(None) == ""
    assert io.format_value(float("nan")) == ""
    assert io.format_value(True) == "1"
    assert io.format_value(np.int64(3)) == "3"
    assert io.parse_value("") is None
    assert io.parse_value("eta") == "eta"


@given(rows=st.lists(st.fixed_dictionaries({
    "a": st.floats(allow_nan=False, allow_infinity=False),
    "b": st.text(alphabet="xyz, \"", min_size=1, max_size=5).filter(lambda s: s.strip(",\" ") != "" and not _numeric(s)),
}), max_size=5))
def test_csv_round_trip(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("csv") / "t.csv"
    io.write_csv(path, ["a", "b"], rows, meta={"n": 3, "name": "x"})
    cols, back, meta = io.read_csv(path)
    assert cols == ["a", "b"]
    assert back == rows
    assert meta == {"n": 3.0, "name": "x"}


def _numeric(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def test_malformed_csv_rejected(tmp_path):
    path = tmp_path / "drift.csv"
    path.write_text("quantity,drift\nmass,1,2\n")
    with pytest.raises(ValueError):
        io.read_csv(path)
    path.write_text("quantity,value\nmass,1\n")
    with pytest.raises(ValueError):
        io.validate_csv(path)
    (tmp_path / "empty.csv").write_text("# a=1\n")
    with pytest.raises(ValueError):
        io.read_csv(tmp_path / "empty.csv")


def test_convergence_rows_layout():
    report = ErrorReport([ErrorRow(0.1, 4.0, 4.0, 2.0, 2.0), ErrorRow(0.05, 1.0, 1.0, 1.0, 1.0)])
    rows = io.convergence_rows(report)
    assert rows[0]["R0_H"] is None
    assert rows[1]["R0_H"] == pytest.approx(2.0)
    assert rows[1]["R1_U"] == pytest.approx(1.0)


def test_wave_file_round_trip(tmp_path):
    wave = petviashvili_solve(-10, 10, 50, 2, 1.3)
    io.write_wave(tmp_path / "wave.csv", wave)
    back = io.read_wave(tmp_path / "wave.csv")
    assert back.c_s == wave.c_s and back.center == wave.center
    for name in ("eta", "u", "eta_x", "u_x"):
        np.testing.assert_array_equal(getattr(back, name).values, getattr(wave, name).values)
    assert back.eta.space.degree == 2


def test_write_outputs_for_every_result_kind(tmp_path):
    files = io.write_outputs(None, tmp_path / "empty")
    assert {p.name for p in files} >= {"convergence.csv", "schema.json", "run.json"}
    assert io.validate_csv(tmp_path / "empty" / "convergence.csv") == 0

    res = run_solitary_propagation(dx=0.2, dt=0.2, T=1.0, snapshot_times=(0.0,))
    files = io.write_outputs(res, tmp_path / "run", config={"note": "test"})
    names = {p.name for p in files}
    assert {"invariants.csv", "drift.csv", "tracking.csv", "snapshots.csv", "run.json"} <= names
    for p in files:
        if p.suffix == ".csv":
            io.validate_csv(p)
    manifest = json.loads((tmp_path / "run" / "run.json").read_text())
    assert manifest["config"]["note"] == "test"
    assert manifest["steps"] == 5
    assert "numpy" in manifest["versions"]
    assert math.isfinite(manifest["wall_time_s"])
    schema = json.loads((tmp_path / "run" / "schema.json").read_text())
    assert schema["invariants.csv"]["gamma"]

    with pytest.raises(TypeError):
        io.write_outputs(object(), tmp_path / "bad")
