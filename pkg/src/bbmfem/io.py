"""CSV tables, wave files, gnuplot scripts and run manifests."""
from __future__ import annotations

import csv
import json
import math
import platform
from pathlib import Path

import numpy as np

from .diagnostics import ErrorReport
from .mesh import ConfigurationError, FemFunction, UniformMesh
from .semidisc import BoundaryKind, make_spaces

# -- schemas --------------------------------------------------------------------------------

CONVERGENCE_COLUMNS = ["dx", "E0_H", "R0_H", "E0_U", "R0_U", "E1_H", "R1_H", "E1_U", "R1_U",
                       "tE1_H", "tR1_H", "tE1_U", "tR1_U"]
INVARIANT_COLUMNS = ["t", "mass", "momentum", "impulse", "energy", "gamma"]
TRACKING_COLUMNS = ["t", "x_star", "E_amp", "E_phase", "E_shape"]
DRIFT_COLUMNS = ["quantity", "drift", "expected_conserved"]
SNAPSHOT_COLUMNS = ["t", "x", "eta", "u"]
RESIDUAL_COLUMNS = ["iteration", "residual"]
WAVE_COLUMNS = ["field", "index", "value"]

SCHEMA = {
    "convergence.csv": {
        "dx": "mesh width",
        "E0_H": "L2 error of H at the final time", "R0_H": "rate of E0_H against the previous row",
        "E0_U": "L2 error of U", "R0_U": "rate of E0_U",
        "E1_H": "H1 error of H", "R1_H": "rate of E1_H",
        "E1_U": "H1 error of U", "R1_U": "rate of E1_U",
        "tE1_H": "sqrt(|H - eta|^2 + |W - eta_x|^2), empty for the standard scheme",
        "tR1_H": "rate of tE1_H",
        "tE1_U": "sqrt(|U - u|^2 + |V - u_x|^2), empty for the standard scheme",
        "tR1_U": "rate of tE1_U",
    },
    "invariants.csv": {
        "t": "recorded (relaxed) time", "mass": "integral of H", "momentum": "integral of U",
        "impulse": "integral of H U + H_x U_x / 6", "energy": "integral of (H^2 + (1 + H) U^2) / 2",
        "gamma": "relaxation parameter of the step ending at t (1 without relaxation)",
    },
    "tracking.csv": {
        "t": "recorded time", "x_star": "crest position (unwrapped)",
        "E_amp": "relative amplitude error", "E_phase": "|x_star - c_s t - x0|",
        "E_shape": "relative L2 distance to the best translate of the initial profile",
    },
    "drift.csv": {
        "quantity": "invariant name", "drift": "max_n |K(t_n) - K(t_0)|",
        "expected_conserved": "1 if the scheme conserves it for this boundary condition",
    },
    "snapshots.csv": {"t": "snapshot time", "x": "node", "eta": "H at the node", "u": "U at the node"},
    "residuals.csv": {"iteration": "Petviashvili iteration", "residual": "normalised residual R_n"},
    "wave.csv": {
        "field": "eta, u, eta_x or u_x", "index": "degree of freedom", "value": "coefficient",
    },
}


# -- CSV -------------------------------------------------------------------------------------


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else f"{float(v):.17g}"
    return str(v)


def parse_value(text: str):
    if text == "":
        return None
    try:
        return float(text)
    except ValueError:
        return text


def write_csv(path, columns, rows, meta: dict | None = None) -> Path:
    """Header then one line per row; ``meta`` goes in leading ``# key=value`` lines."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key}={format_value(value)}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(c)) for c in columns])
    return path


def read_csv(path):
    """``(columns, rows, meta)`` of a file written by :func:`write_csv`."""
    meta = {}
    with open(path, newline="") as fh:
        lines = []
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = parse_value(value.strip())
            elif line.strip():
                lines.append(line)
    reader = csv.reader(lines)
    try:
        columns = next(reader)
    except StopIteration:
        raise ValueError(f"{path}: missing header row")
    rows = []
    for lineno, values in enumerate(reader, start=2):
        if len(values) != len(columns):
            raise ValueError(f"{path}:{lineno}: expected {len(columns)} fields, got {len(values)}")
        rows.append({c: parse_value(v) for c, v in zip(columns, values)})
    return columns, rows, meta


def validate_csv(path) -> int:
    """Parse ``path`` and check its header against the schema; returns the row count."""
    path = Path(path)
    columns, rows, _ = read_csv(path)
    expected = SCHEMA.get(path.name)
    if expected is not None and columns != list(expected):
        raise ValueError(f"{path}: columns {columns} do not match the schema {list(expected)}")
    return len(rows)


# -- result tables ---------------------------------------------------------------------------


def convergence_rows(report: ErrorReport):
    rate_cols = {"E0_H": "R0_H", "E0_U": "R0_U", "E1_H": "R1_H", "E1_U": "R1_U",
                 "tE1_H": "tR1_H", "tE1_U": "tR1_U"}
    rates = {key: [None] + report.rates(key) for key in rate_cols}
    out = []
    for i, row in enumerate(report.rows):
        rec = {"dx": row.dx}
        for key, rate_key in rate_cols.items():
            rec[key] = getattr(row, key)
            rec[rate_key] = rates[key][i] if i < len(rates[key]) else None
        out.append(rec)
    return out


def invariant_rows(series):
    return [
        {"t": rec.t, "mass": rec.mass, "momentum": rec.momentum, "impulse": rec.impulse,
         "energy": rec.energy, "gamma": g}
        for rec, g in zip(series.invariants, series.invariant_gammas)
    ]


def drift_rows(drift):
    return [{"quantity": k, "drift": v, "expected_conserved": k in drift.expected}
            for k, v in drift.as_dict().items()]


def snapshot_rows(snapshots):
    rows = []
    for snap in snapshots:
        for x, e, u in zip(snap.x, snap.eta, snap.u):
            rows.append({"t": snap.t, "x": x, "eta": e, "u": u})
    return rows


# -- wave files ------------------------------------------------------------------------------


def write_wave(path, wave) -> Path:
    space = wave.eta.space
    mesh = space.mesh
    meta = {
        "degree": space.degree,
        "bc": "periodic" if space.periodic else "reflective",
        "a": mesh.a, "b": mesh.b, "n_cells": mesh.n_cells,
        "c_s": wave.c_s, "center": wave.center,
        "iterations": wave.iterations,
    }
    rows = []
    for name in ("eta", "u", "eta_x", "u_x"):
        for i, v in enumerate(getattr(wave, name).values):
            rows.append({"field": name, "index": i, "value": v})
    return write_csv(path, WAVE_COLUMNS, rows, meta)


def read_wave(path):
    """Rebuild a :class:`~bbmfem.waves.TravellingWave` from a wave file."""
    from .waves import TravellingWave

    _, rows, meta = read_csv(path)
    try:
        mesh = UniformMesh(float(meta["a"]), float(meta["b"]), int(meta["n_cells"]))
        bc = BoundaryKind(meta["bc"])
        degree = int(meta["degree"])
        c_s, center = float(meta["c_s"]), float(meta["center"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"{path}: incomplete wave metadata ({exc})")
    eta_s, w_s, u_s, v_s = make_spaces(mesh, degree, bc)
    values = {name: [] for name in ("eta", "u", "eta_x", "u_x")}
    for row in rows:
        values[row["field"]].append(row["value"])
    funcs = {}
    for name, space in (("eta", eta_s), ("u", u_s), ("eta_x", w_s), ("u_x", v_s)):
        vec = np.array(values[name], dtype=float)
        if vec.size != space.dof_count:
            raise ConfigurationError(f"{path}: {name} has {vec.size} values, expected {space.dof_count}")
        funcs[name] = FemFunction(space, vec)
    return TravellingWave(c_s, center, funcs["eta"], funcs["u"], funcs["eta_x"], funcs["u_x"],
                          [float("nan")] * (int(meta.get("iterations") or 0) + 1))


# -- plot scripts ----------------------------------------------------------------------------

_GP_HEADER = "set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 900,600\n"

PLOT_SCRIPTS = {
    "convergence.csv": (
        "convergence.gp",
        _GP_HEADER + "set output 'convergence.png'\nset logscale xy\nset xlabel 'dx'\n"
        "plot 'convergence.csv' using 1:2 with linespoints, '' using 1:4 with linespoints, "
        "'' using 1:6 with linespoints, '' using 1:8 with linespoints\n",
    ),
    "invariants.csv": (
        "invariants.gp",
        _GP_HEADER + "set output 'invariants.png'\nset xlabel 't'\nset ylabel 'K(t) - K(0)'\n"
        "stats 'invariants.csv' using 2 every ::0::0 nooutput name 'M0'\n"
        "stats 'invariants.csv' using 5 every ::0::0 nooutput name 'E0'\n"
        "plot 'invariants.csv' using 1:($2-M0_min) title 'mass' with lines, "
        "'' using 1:($5-E0_min) title 'energy' with lines\n"
        "set output 'gamma.png'\nset ylabel 'gamma - 1'\n"
        "plot 'invariants.csv' using 1:($6-1) title 'gamma - 1' with lines\n",
    ),
    "tracking.csv": (
        "tracking.gp",
        _GP_HEADER + "set output 'tracking.png'\nset logscale y\nset xlabel 't'\n"
        "plot 'tracking.csv' using 1:3 with lines, '' using 1:4 with lines, '' using 1:5 with lines\n",
    ),
    "snapshots.csv": (
        "snapshots.gp",
        _GP_HEADER + "set output 'snapshots.png'\nset xlabel 'x'\nset ylabel 'eta'\n"
        "plot 'snapshots.csv' using 2:3 with lines title 'eta (all snapshots)'\n",
    ),
    "residuals.csv": (
        "residuals.gp",
        _GP_HEADER + "set output 'residuals.png'\nset logscale y\nset xlabel 'iteration'\n"
        "plot 'residuals.csv' using 1:2 with linespoints\n",
    ),
}


# -- manifest --------------------------------------------------------------------------------


def versions() -> dict:
    import scipy

    from . import __version__

    return {"python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "bbmfem": __version__}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return None if math.isnan(obj) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if hasattr(obj, "value"):
        return obj.value
    return obj


def write_outputs(result, out_dir, config: dict | None = None, wall_time: float | None = None,
                  summary: dict | None = None) -> list:
    """Write every table of ``result`` plus the schema, plot scripts and ``run.json``.

    ``result`` is an :class:`ErrorReport`, a propagation result, a
    travelling wave, or ``None`` (header-only convergence table).
    """
    from .experiments import PropagationResult
    from .waves import TravellingWave

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    manifest = {"config": _jsonable(config or {}), "versions": versions()}

    if result is None or isinstance(result, ErrorReport):
        rows = convergence_rows(result) if result is not None else []
        written.append(write_csv(out / "convergence.csv", CONVERGENCE_COLUMNS, rows))
    elif isinstance(result, PropagationResult):
        manifest["config"] = _jsonable({**result.config, **(config or {})})
        written.append(write_csv(out / "invariants.csv", INVARIANT_COLUMNS, invariant_rows(result.series)))
        written.append(write_csv(out / "drift.csv", DRIFT_COLUMNS, drift_rows(result.drift)))
        if result.tracks:
            written.append(write_csv(out / "tracking.csv", TRACKING_COLUMNS,
                                     [vars(rec) for rec in result.tracks]))
        if result.snapshots:
            written.append(write_csv(out / "snapshots.csv", SNAPSHOT_COLUMNS,
                                     snapshot_rows(result.snapshots)))
        manifest["gamma"] = result.series.gamma_stats()
        manifest["steps"] = len(result.series.times) - 1
        manifest["petviashvili_iterations"] = _jsonable(result.wave_iterations)
        if wall_time is None:
            wall_time = result.wall_time
    elif isinstance(result, TravellingWave):
        written.append(write_wave(out / "wave.csv", result))
        written.append(write_csv(out / "residuals.csv", RESIDUAL_COLUMNS,
                                 [{"iteration": i, "residual": r}
                                  for i, r in enumerate(result.residual_history)]))
        manifest["amplitude"] = result.amplitude
        manifest["iterations"] = result.iterations
    else:
        raise TypeError(f"cannot write results of type {type(result).__name__}")

    names = [p.name for p in written]
    with open(out / "schema.json", "w") as fh:
        json.dump({n: SCHEMA[n] for n in names}, fh, indent=2)
    written.append(out / "schema.json")
    for name in names:
        if name in PLOT_SCRIPTS:
            script, body = PLOT_SCRIPTS[name]
            (out / script).write_text(body)
            written.append(out / script)

    manifest["wall_time_s"] = wall_time
    manifest["files"] = [p.name for p in written]
    if summary:
        manifest["summary"] = _jsonable(summary)
    with open(out / "run.json", "w") as fh:
        json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
    written.append(out / "run.json")
    return written
