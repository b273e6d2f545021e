"""Acceptance gates: reference runs checked against tabulated values.

Each ``criterion_N`` returns a :class:`CriterionResult` whose ``checks``
list every measured quantity with its gate. Expensive runs are cached so
criteria sharing a run do not repeat it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import experiments as ex
from .diagnostics import convergence_rates
from .functionals import energy, relaxation_coefficients
from .linalg import SaddleOperator, factor
from .mesh import FemFunction, FemSpace, Bc, UniformMesh, assemble_coupling, gauss_legendre, l2_project
from .timeint import classic_rk4, rk_direction
from .waves import _periodic_case, _reflective_case, petviashvili_solve, validate_forcing

CONVERGENCE_DXS = (0.1, 0.05, 0.02, 0.01, 0.005)


@dataclass
class Check:
    label: str
    value: float | None
    lo: float
    hi: float

    @property
    def passed(self) -> bool:
        return self.value is not None and math.isfinite(self.value) and self.lo <= self.value <= self.hi

    def __str__(self):
        v = "n/a" if self.value is None else f"{self.value:.6g}"
        return f"{self.label}={v} in [{self.lo:.6g}, {self.hi:.6g}]"


@dataclass
class CriterionResult:
    number: int
    title: str
    checks: list = field(default_factory=list)
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.checks)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        if self.error:
            detail = f"error: {self.error}"
        else:
            detail = "; ".join(("" if c.passed else "!") + str(c) for c in self.checks)
        return f"[{status}] criterion {self.number}: {self.title} -- {detail}"


def within_rel(label, value, target, rel):
    return Check(label, value, target * (1 - rel), target * (1 + rel))


def within_factor(label, value, target, factor_):
    return Check(label, value, target / factor_, target * factor_)


def at_most(label, value, bound):
    return Check(label, value, -math.inf, bound)


def between(label, value, lo, hi):
    return Check(label, value, lo, hi)


# -- cached runs -----------------------------------------------------------------------------


@lru_cache(maxsize=None)
def convergence(bc, r, scheme="conservative", dxs=CONVERGENCE_DXS):
    return ex.run_convergence_study(bc, scheme, r, dxs)


@lru_cache(maxsize=None)
def solitary(r, scheme="conservative"):
    """Tracked solitary run with dx = dt = 0.1 to T = 100."""
    return ex.run_solitary_propagation(r=r, dx=0.1, dt=0.1, T=100.0, scheme=scheme)


@lru_cache(maxsize=None)
def solitary_dt(r, dx, dt, T, scheme="conservative"):
    return ex.run_solitary_propagation(r=r, dx=dx, dt=dt, T=T, scheme=scheme, track=False)


@lru_cache(maxsize=None)
def reflection(r):
    return ex.run_reflection(r=r)


# -- criteria --------------------------------------------------------------------------------


def criterion_1():
    res = CriterionResult(1, "reflective convergence (r=1, r=3)")
    r1, r3 = convergence("reflective", 1), convergence("reflective", 3)
    res.checks += [
        within_rel("r1 E0[H](0.1)", r1.rows[0].E0_H, 5.595e-2, 0.02),
        between("r1 R0[H]", r1.terminal_rate("E0_H"), 1.95, 2.05),
        within_rel("r3 E0[H](0.1)", r3.rows[0].E0_H, 7.335e-5, 0.02),
        between("r3 R0[H]", r3.terminal_rate("E0_H"), 3.9, 4.1),
    ]
    return res


def criterion_2():
    res = CriterionResult(2, "even/odd dichotomy (r=2 suboptimal, r=3 superconvergent)")
    r2, r3 = convergence("reflective", 2), convergence("reflective", 3)
    res.checks += [
        between("r2 R0[H]", r2.terminal_rate("E0_H"), 1.9, 2.1),
        between("r2 R1[H]", r2.terminal_rate("E1_H"), 0.9, 1.1),
        between("r3 tR1[H]", r3.terminal_rate("tE1_H"), 3.9, 4.1),
    ]
    return res


def criterion_3():
    res = CriterionResult(3, "periodic convergence")
    p1, p3 = convergence("periodic", 1), convergence("periodic", 3)
    res.checks += [
        within_rel("r1 E0[H](0.1)", p1.rows[0].E0_H, 6.310e-2, 0.02),
        between("r1 R0[H]", p1.terminal_rate("E0_H"), 1.95, 2.05),
        between("r3 R0[H]", p3.terminal_rate("E0_H"), 3.9, 4.1),
        between("r3 R1[H]", p3.terminal_rate("E1_H"), 2.9, 3.1),
    ]
    return res


def criterion_4():
    res = CriterionResult(4, "exact travelling wave, periodic [-20,20], T=10")
    for r, lo, hi in ((1, 1.9, 2.1), (3, 3.9, 4.1)):
        rep = ex.run_exact_wave_study(r=r, dx_list=(0.2, 0.1, 0.05), T=10.0)
        finite = all(math.isfinite(e) for e in rep.errors("E0_H") + rep.errors("E0_U"))
        res.checks.append(between(f"r{r} finite", 1.0 if finite else 0.0, 1.0, 1.0))
        res.checks.append(between(f"r{r} R0[H]", rep.terminal_rate("E0_H"), lo, hi))
        res.checks.append(between(f"r{r} R0[U]", rep.terminal_rate("E0_U"), lo, hi))
    return res


def criterion_5():
    res = CriterionResult(5, "exact conservation (solitary T=100, reflection T=50)")
    for r in (1, 3):
        d = solitary(r).drift
        res.checks += [
            at_most(f"r{r} E_M", d.E_mass, 1e-13),
            at_most(f"r{r} E_I", d.E_momentum, 1e-13),
            at_most(f"r{r} E_E", d.E_energy, 1e-13),
        ]
    d = reflection(1).drift
    res.checks += [at_most("wall E_M", d.E_mass, 1e-12), at_most("wall E_E", d.E_energy, 1e-12)]
    return res


def criterion_6():
    res = CriterionResult(6, "standard-scheme energy drift")
    coarse = solitary_dt(1, 0.1, 0.1, 100.0, "standard").drift.E_energy
    fine = solitary_dt(1, 0.05, 0.05, 100.0, "standard").drift.E_energy
    res.checks += [
        within_factor("E_E(0.1)", coarse, 2.2332e-5, 3.0),
        Check("E_E(0.1)/E_E(0.05)", coarse / fine if fine > 0 else None, 8.0, math.inf),
    ]
    return res


def criterion_7():
    res = CriterionResult(7, "relaxation parameter band")
    stats = solitary(1).series.gamma_stats()
    g = np.asarray(solitary(1).series.gammas[1:]) - 1.0
    half = solitary_dt(1, 0.1, 0.05, 100.0).series.gamma_stats()
    res.checks += [
        between("min(gamma-1)", stats["min_gamma_minus_1"], 1e-7, 1e-4),
        between("max(gamma-1)", stats["max_gamma_minus_1"], 1e-7, 1e-4),
        within_factor("mean(gamma-1)", float(np.mean(g)), 5.47e-6, 3.0),
        between("max|gamma-1| ratio dt/(dt/2)",
                stats["max_abs_gamma_minus_1"] / half["max_abs_gamma_minus_1"], 4.0, 16.0),
    ]
    return res


def criterion_8():
    res = CriterionResult(8, "Petviashvili iteration")
    wave = petviashvili_solve(-40.0, 40.0, 800, 3, 1.6)
    slow = petviashvili_solve(-20.0, 20.0, 400, 3, math.sqrt(1.6))
    res.checks += [
        at_most("c=1.6 residual", wave.residual_history[-1], 1e-10),
        at_most("c=1.6 iterations", wave.iterations, 60),
        between("c=sqrt(1.6) amplitude", slow.amplitude, 0.5919 - 2e-3, 0.5919 + 2e-3),
    ]
    return res


def criterion_9():
    res = CriterionResult(9, "wave-tracking errors, r=3, mean over t in [80,100]")
    means = solitary(3).mean_track(80.0, 100.0)
    res.checks += [
        within_factor("E_amp", means["E_amp"], 8.1121e-6, 3.0),
        within_factor("E_shape", means["E_shape"], 9.0861e-6, 3.0),
    ]
    return res


# -- criterion 10: property checks -------------------------------------------------------------


def _cubic_identity_error(seed=0):
    rng = np.random.default_rng(seed)
    space = FemSpace(UniformMesh(0.0, 1.0, 7), 2, Bc.PERIODIC)
    H, U, dH, dU = (FemFunction(space, rng.standard_normal(space.dof_count)) for _ in range(4))
    A, B, G = relaxation_coefficients(H, U, dH, dU)
    worst = 0.0
    for tau in (0.3, -0.7, 1.9):
        moved = energy(FemFunction(space, H.values + tau * dH.values),
                       FemFunction(space, U.values + tau * dU.values))
        exact = moved - energy(H, U)
        cubic = 0.5 * (G * tau + B * tau**2 + A * tau**3)
        worst = max(worst, abs(exact - cubic) / max(abs(exact), 1e-300))
    return worst


def _projection_idempotence_error():
    space = FemSpace(UniformMesh(-1.0, 2.0, 9), 3, Bc.FREE)
    p1 = l2_project(space, lambda x: np.exp(np.sin(3 * x)))
    p2 = l2_project(space, p1)
    return float(np.max(np.abs(p2.values - p1.values)))


def _quadrature_error():
    worst = 0.0
    for n in range(1, 9):
        rule = gauss_legendre(n)
        for k in range(2 * n):
            worst = max(worst, abs(rule.weights @ rule.nodes**k - 1.0 / (k + 1)))
    return worst


def _round_trip_error(seed=1):
    rng = np.random.default_rng(seed)
    mesh = UniformMesh(0.0, 3.0, 12)
    free, zero = FemSpace(mesh, 2, Bc.FREE), FemSpace(mesh, 2, Bc.ZERO)
    saddle = SaddleOperator(free.mass(), assemble_coupling(free, zero), zero.mass())
    xa, xb = rng.standard_normal(free.dof_count), rng.standard_normal(zero.dof_count)
    y = saddle.matrix @ np.concatenate([xa, xb])
    ya, yb = saddle.solve(y[: free.dof_count], y[free.dof_count:])
    mass = factor(free.mass())
    x = rng.standard_normal(free.dof_count)
    err = max(np.max(np.abs(ya - xa)), np.max(np.abs(yb - xb)),
              np.max(np.abs(mass.solve(free.mass() @ x) - x)))
    return float(err)


def rk4_observed_order():
    """Observed order of classical RK4 on ``y' = -y + sin(t) y^2``."""
    tab = classic_rk4()

    def rhs(t, y):
        return -y + np.sin(t) * y * y

    def solve(n):
        y, t, dt = np.array([0.5]), 0.0, 1.0 / n
        for _ in range(n):
            d, _ = rk_direction(rhs, y, t, dt, tab)
            y, t = y + dt * d, t + dt
        return y[0]

    ref = solve(4096)
    errs = [abs(solve(n) - ref) for n in (16, 32, 64)]
    return convergence_rates(errs, [1 / 16, 1 / 32, 1 / 64])[-1]


def criterion_10():
    res = CriterionResult(10, "property suite")
    res.checks += [
        at_most("cubic energy identity (rel)", _cubic_identity_error(), 1e-12),
        at_most("projection idempotence", _projection_idempotence_error(), 1e-12),
        at_most("quadrature exactness", _quadrature_error(), 1e-14),
        at_most("multiply-then-solve", _round_trip_error(), 1e-11),
        between("RK4 observed order", rk4_observed_order(), 3.8, 4.2),
        at_most("forcing FD oracle (reflective)", validate_forcing(_reflective_case(), 200, tol=math.inf), 1e-6),
        at_most("forcing FD oracle (periodic)", validate_forcing(_periodic_case(), 200, tol=math.inf), 1e-6),
    ]
    return res


CRITERIA = {n: globals()[f"criterion_{n}"] for n in range(1, 11)}


def run_criterion(n: int) -> CriterionResult:
    try:
        return CRITERIA[n]()
    except Exception as exc:  # report, do not abort the suite
        return CriterionResult(n, CRITERIA[n].__name__, error=f"{type(exc).__name__}: {exc}")


def run_all(numbers=None, echo=print):
    results = []
    for n in numbers or sorted(CRITERIA):
        result = run_criterion(n)
        if echo is not None:
            echo(result.line())
        results.append(result)
    return results


def clear_cache():
    for fn in (convergence, solitary, solitary_dt, reflection):
        fn.cache_clear()
