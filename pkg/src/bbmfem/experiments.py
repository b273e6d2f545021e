"""Scripted studies: manufactured-solution convergence, solitary-wave
propagation, overtaking collision and wall reflection.

Each runner is a pure function of its arguments and returns a result
object holding tables ready for :mod:`bbmfem.io`.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .diagnostics import (
    DriftReport,
    ErrorReport,
    ErrorRow,
    drift_report,
    evaluate,
    modified_h1_error,
    norm_error,
    shape_error_solver,
    track_peak,
    wave_errors,
)
from .errors import NumericalFailure
from .mesh import ConfigurationError, FemFunction
from .semidisc import BoundaryKind, MixedState, SchemeKind, Semidiscretization
from .timeint import Integrator, RelaxationConfig, StepRecord
from .waves import (
    EXACT_WAVE_SPEED,
    TravellingWave,
    exact_travelling_wave,
    exact_travelling_wave_derivatives,
    manufactured_case,
    petviashvili_solve,
    transfer_wave,
)

SQRT_1_6 = math.sqrt(1.6)
WAVE_DEGREE = 3  # solitary waves are generated with cubic elements


def cells_for(a: float, b: float, dx: float) -> int:
    """Number of uniform cells of width ``dx`` on ``[a, b]``; must be an integer."""
    n = (b - a) / dx
    n_int = int(round(n))
    if n_int < 2 or abs(n - n_int) > 1e-8 * max(1.0, n):
        raise ConfigurationError(f"dx={dx} does not divide [{a}, {b}] into whole cells")
    return n_int


# -- convergence studies ---------------------------------------------------------------------


def _error_row(semi: Semidiscretization, state: MixedState, fields, t: float, reference: str):
    """``fields`` maps H/U to pairs (f(x), f_x(x)) of exact callables at time ``t``."""
    funcs = semi.functions(state)
    (eta, eta_x), (u, u_x) = fields["H"], fields["U"]
    row = ErrorRow(
        dx=semi.dx,
        E0_H=norm_error(funcs["H"], eta, s=0, reference=reference),
        E0_U=norm_error(funcs["U"], u, s=0, reference=reference),
        E1_H=norm_error(funcs["H"], eta, eta_x, s=1, reference=reference),
        E1_U=norm_error(funcs["U"], u, u_x, s=1, reference=reference),
    )
    if semi.conservative:
        row.tE1_H = modified_h1_error(funcs["H"], funcs["W"], eta, eta_x, reference)
        row.tE1_U = modified_h1_error(funcs["U"], funcs["V"], u, u_x, reference)
    return row


def _run_map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _manufactured_row(bc, scheme, r, dx, dt_ratio, T, reference):
    case = manufactured_case(bc)
    a, b = case.interval
    semi = Semidiscretization(a, b, cells_for(a, b, dx), r, bc, scheme)
    state = semi.initial_state(
        lambda x: case.eta(x, 0.0), lambda x: case.u(x, 0.0),
        lambda x: case.eta_x(x, 0.0), lambda x: case.u_x(x, 0.0),
    )
    integ = Integrator(semi, relaxation=RelaxationConfig(enabled=False), forcing=case.forcing())
    state, _ = integ.integrate(state, T, dt_ratio * semi.dx, stride=10**9)
    t = state.t
    fields = {
        "H": (lambda x: case.eta(x, t), lambda x: case.eta_x(x, t)),
        "U": (lambda x: case.u(x, t), lambda x: case.u_x(x, t)),
    }
    return _error_row(semi, state, fields, t, reference)


def run_convergence_study(bc, scheme="conservative", r: int = 1,
                          dx_list: Sequence[float] = (0.1, 0.05, 0.02, 0.01, 0.005),
                          dt_ratio: float = 0.1, T: float = 1.0, reference: str = "interpolant",
                          jobs: int = 1) -> ErrorReport:
    """Errors of the forced manufactured problem on ``[0, 1]`` for each ``dx``.

    Time stepping is classical RK4 without relaxation (the forced system has
    no invariant energy) with ``dt = dt_ratio * dx``. ``reference`` selects
    whether errors are measured against the exact fields or against their
    degree-``r`` nodal interpolants.
    """
    bc, scheme = BoundaryKind(bc), SchemeKind(scheme)
    rows = _run_map(lambda dx: _manufactured_row(bc, scheme, r, dx, dt_ratio, T, reference),
                    list(dx_list), jobs)
    return ErrorReport(rows)


def _exact_wave_row(r, dx, dt_ratio, T, domain, relax, reference):
    a, b = domain
    semi = Semidiscretization(a, b, cells_for(a, b, dx), r, BoundaryKind.PERIODIC)

    state = semi.initial_state(*_periodic_exact_fields(0.0, b - a))
    integ = Integrator(semi, relaxation=RelaxationConfig(enabled=relax))
    state, _ = integ.integrate(state, T, dt_ratio * semi.dx, stride=10**9)
    if not np.all(np.isfinite(semi.pack(state))):
        raise NumericalFailure("exact travelling wave run became non-finite")
    eta, u, eta_x, u_x = _periodic_exact_fields(state.t, b - a)
    return _error_row(semi, state, {"H": (eta, eta_x), "U": (u, u_x)}, state.t, reference)


def _periodic_exact_fields(t, L):
    """Closed-form wave wrapped onto a period of length ``L`` centred on its crest."""

    def lag(x):
        s = np.asarray(x) - EXACT_WAVE_SPEED * t
        return np.mod(s + 0.5 * L, L) - 0.5 * L

    return (
        lambda x: exact_travelling_wave(lag(x), 0.0)[0],
        lambda x: exact_travelling_wave(lag(x), 0.0)[1],
        lambda x: exact_travelling_wave_derivatives(lag(x), 0.0)[0],
        lambda x: exact_travelling_wave_derivatives(lag(x), 0.0)[1],
    )


def run_exact_wave_study(r: int = 1, dx_list: Sequence[float] = (0.1, 0.05, 0.02),
                         dt_ratio: float = 0.1, T: float = 10.0, domain=(-20.0, 20.0),
                         relax: bool = True, reference: str = "interpolant",
                         jobs: int = 1) -> ErrorReport:
    """Periodic propagation of the closed-form travelling wave, errors at ``T``."""
    rows = _run_map(lambda dx: _exact_wave_row(r, dx, dt_ratio, T, domain, relax, reference),
                    list(dx_list), jobs)
    return ErrorReport(rows)


# -- solitary-wave runs ----------------------------------------------------------------------


@dataclass
class RunSeries:
    """Per-step output of a time integration."""

    times: list = field(default_factory=list)
    gammas: list = field(default_factory=list)
    invariants: list = field(default_factory=list)  # InvariantRecord at stride points
    invariant_gammas: list = field(default_factory=list)

    def add(self, rec: StepRecord):
        self.times.append(rec.t)
        self.gammas.append(rec.gamma)
        if rec.invariants is not None:
            self.invariants.append(rec.invariants)
            self.invariant_gammas.append(rec.gamma)

    def gamma_stats(self):
        g = np.asarray(self.gammas[1:]) - 1.0  # the first entry is the initial record
        if g.size == 0:
            return {"min_gamma_minus_1": 0.0, "max_gamma_minus_1": 0.0, "max_abs_gamma_minus_1": 0.0}
        return {
            "min_gamma_minus_1": float(g.min()),
            "max_gamma_minus_1": float(g.max()),
            "max_abs_gamma_minus_1": float(np.abs(g).max()),
        }


@dataclass
class Snapshot:
    t: float
    x: np.ndarray
    eta: np.ndarray
    u: np.ndarray


@dataclass
class PropagationResult:
    config: dict
    series: RunSeries
    drift: DriftReport
    tracks: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    wave_iterations: dict = field(default_factory=dict)
    wall_time: float = 0.0
    final_state: Optional[MixedState] = None

    def mean_track(self, t_lo: float, t_hi: float) -> dict:
        sel = [rec for rec in self.tracks if t_lo <= rec.t <= t_hi]
        if not sel:
            raise ValueError(f"no tracking records in [{t_lo}, {t_hi}]")
        return {k: float(np.mean([getattr(rec, k) for rec in sel]))
                for k in ("E_amp", "E_phase", "E_shape")}


def _make_semi(domain, dx, r, bc, scheme):
    a, b = map(float, domain)
    return Semidiscretization(a, b, cells_for(a, b, dx), r, bc, scheme)


def generate_wave(c_s, domain, dx, bc, center, r_run, transfer, seed_wave=None):
    """Solitary wave computed with cubic elements, moved to the run's degree."""
    if seed_wave is not None:
        wave = seed_wave
    else:
        a, b = map(float, domain)
        wave = petviashvili_solve(a, b, cells_for(a, b, dx), WAVE_DEGREE, c_s, bc=bc, center=center)
    if wave.eta.space.degree != r_run:
        wave = transfer_wave(wave, r_run, method=transfer)
    return wave


def _state_from_waves(semi: Semidiscretization, waves: Sequence[TravellingWave]) -> MixedState:
    """Pointwise sum of the coefficient vectors of several waves."""
    H = sum(w.eta.values for w in waves)
    U = sum(w.u.values for w in waves)
    if not semi.conservative:
        return MixedState(H=H, U=U)
    W = sum(w.eta_x.values for w in waves)
    V = sum(w.u_x.values for w in waves)
    return MixedState(H=H, U=U, W=W, V=V)


class _SnapshotPicker:
    """Keeps the states whose recorded times are nearest to requested times."""

    def __init__(self, semi, times):
        self.semi = semi
        self.targets = sorted(float(t) for t in times)
        self.best = {t: None for t in self.targets}

    def offer(self, state: MixedState):
        for target in self.targets:
            cur = self.best[target]
            if cur is None or abs(state.t - target) < abs(cur.t - target):
                self.best[target] = state

    def snapshots(self):
        semi = self.semi
        x = np.array(semi.eta_space.node_coords)
        out = []
        for target in self.targets:
            st = self.best[target]
            if st is None:
                continue
            funcs = semi.functions(st)
            out.append(Snapshot(st.t, x, funcs["H"](x), funcs["U"](x)))
        return out


def _integrate(semi, state, T, dt, relax, stride, snapshot_times=(), on_step=None):
    integ = Integrator(semi, relaxation=RelaxationConfig(enabled=relax))
    series = RunSeries()
    picker = _SnapshotPicker(semi, snapshot_times)
    picker.offer(state)

    def callback(st, rec):
        series.add(rec)
        picker.offer(st)
        if on_step is not None:
            on_step(st, rec)

    series.add(StepRecord(state.t, 1.0, 0, integ.invariants(state)))
    state, _ = integ.integrate(state, T, dt, stride=stride, callback=callback)
    return state, series, picker.snapshots()


def run_solitary_propagation(c_s: float = SQRT_1_6, domain=(-20.0, 20.0), r: int = 1,
                             dx: float = 0.1, dt: float = 0.1, T: float = 100.0,
                             scheme="conservative", bc="periodic", x0: float = 0.0,
                             relax: bool | None = None, transfer: str = "project",
                             stride: int = 1, track: bool = True, track_stride: int = 1,
                             snapshot_times: Sequence[float] = (),
                             seed_wave: TravellingWave | None = None) -> PropagationResult:
    """Propagate one solitary wave and record tracking errors and invariants.

    ``relax`` defaults to on for the conservative scheme and off for the
    standard scheme. The wave is generated with cubic elements on the run
    mesh and transferred with ``transfer`` (``project`` or ``interpolate``).
    """
    started = time.perf_counter()
    scheme, bc = SchemeKind(scheme), BoundaryKind(bc)
    if relax is None:
        relax = scheme is SchemeKind.CONSERVATIVE
    config = dict(experiment="solitary", c_s=c_s, domain=list(domain), r=r, dx=dx, dt=dt, T=T,
                  scheme=scheme.value, bc=bc.value, x0=x0, relax=relax, transfer=transfer,
                  stride=stride, track_stride=track_stride, wave_degree=WAVE_DEGREE)
    semi = _make_semi(domain, dx, r, bc, scheme)
    wave = generate_wave(c_s, domain, dx, bc, x0, r, transfer, seed_wave)
    state = _state_from_waves(semi, [wave])
    H_init = FemFunction(semi.eta_space, state.H.copy())

    tracks = []
    on_step = None
    if track:
        shape_solver = shape_error_solver(H_init, c_s, semi.eta_space)
        x_first = track_peak(H_init, x0)
        H0 = float(evaluate(H_init, np.array([x_first]))[0][0])
        tracks.append(wave_errors(H_init, 0.0, H_init, c_s, H0, x0, x_first, shape_solver))
        last = {"x": x_first, "t": 0.0, "n": 0}

        def on_step(st, rec):
            last["n"] += 1
            if last["n"] % track_stride:
                return
            center = last["x"] + c_s * (st.t - last["t"])
            H = FemFunction(semi.eta_space, st.H)
            record = wave_errors(H, st.t, H_init, c_s, H0, x0, center, shape_solver)
            tracks.append(record)
            last["x"], last["t"] = record.x_star, st.t

    state, series, snaps = _integrate(semi, state, T, dt, relax, stride, snapshot_times, on_step)
    return PropagationResult(
        config=config,
        series=series,
        drift=drift_report(series.invariants, bc, scheme),
        tracks=tracks,
        snapshots=snaps,
        wave_iterations={c_s: wave.iterations},
        wall_time=time.perf_counter() - started,
        final_state=state,
    )


def run_long_domain_propagation(r: int = 1, scheme="conservative", dx: float = 0.1,
                                dt: float = 0.1, T: float = 200.0, **kwargs) -> PropagationResult:
    """Solitary wave started at ``x0 = -120`` on ``[-150, 150]``, for trailing-tail studies."""
    kwargs.setdefault("snapshot_times", (0.0, T))
    return run_solitary_propagation(SQRT_1_6, (-150.0, 150.0), r, dx, dt, T, scheme,
                                    x0=-120.0, **kwargs)


def run_collision(speeds=(1.6, 1.2), domain=(-50.0, 150.0), r: int = 1, dx: float = 0.1,
                  dt: float = 0.1, T: float = 600.0, centers=(-25.0, 0.0),
                  snapshot_times: Sequence[float] = (0.0, 140.01, 240.01, 465.02),
                  transfer: str = "project", stride: int = 1) -> PropagationResult:
    """Overtaking collision of two right-moving solitary waves, periodic domain.

    The initial state is the sum of the two waves (and of their derivative
    fields); a zero speed entry drops that wave.
    """
    started = time.perf_counter()
    if len(speeds) != 2 or len(centers) != 2:
        raise ConfigurationError("a collision needs two speeds and two centers")
    bc = BoundaryKind.PERIODIC
    config = dict(experiment="collision", speeds=list(speeds), centers=list(centers),
                  domain=list(domain), r=r, dx=dx, dt=dt, T=T, scheme="conservative",
                  bc=bc.value, relax=True, transfer=transfer, stride=stride,
                  snapshot_times=sorted(snapshot_times), wave_degree=WAVE_DEGREE)
    semi = _make_semi(domain, dx, r, bc, SchemeKind.CONSERVATIVE)
    waves = [generate_wave(c, domain, dx, bc, x, r, transfer)
             for c, x in zip(speeds, centers) if c != 0]
    if not waves:
        raise ConfigurationError("at least one nonzero speed is required")
    state = _state_from_waves(semi, waves)
    state, series, snaps = _integrate(semi, state, T, dt, True, stride, snapshot_times)
    return PropagationResult(
        config=config,
        series=series,
        drift=drift_report(series.invariants, bc),
        snapshots=snaps,
        wave_iterations={w.c_s: w.iterations for w in waves},
        wall_time=time.perf_counter() - started,
        final_state=state,
    )


def run_reflection(c_s: float = 1.6, domain=(-40.0, 40.0), r: int = 1, dx: float = 0.1,
                   dt: float = 0.1, T: float = 50.0, center: float = 0.0,
                   snapshot_times: Sequence[float] = (0.0, 15.0, 25.0, 35.0, 50.0),
                   transfer: str = "project", stride: int = 1) -> PropagationResult:
    """Right-moving solitary wave reflected by the wall at the right end."""
    started = time.perf_counter()
    bc = BoundaryKind.REFLECTIVE
    config = dict(experiment="reflection", c_s=c_s, domain=list(domain), center=center, r=r,
                  dx=dx, dt=dt, T=T, scheme="conservative", bc=bc.value, relax=True,
                  transfer=transfer, stride=stride, snapshot_times=sorted(snapshot_times),
                  wave_degree=WAVE_DEGREE)
    semi = _make_semi(domain, dx, r, bc, SchemeKind.CONSERVATIVE)
    wave = generate_wave(c_s, domain, dx, bc, center, r, transfer)
    state = _state_from_waves(semi, [wave])
    state, series, snaps = _integrate(semi, state, T, dt, True, stride, snapshot_times)
    return PropagationResult(
        config=config,
        series=series,
        drift=drift_report(series.invariants, bc),
        snapshots=snaps,
        wave_iterations={c_s: wave.iterations},
        wall_time=time.perf_counter() - started,
        final_state=state,
    )
