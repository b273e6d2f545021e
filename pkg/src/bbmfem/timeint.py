"""Explicit Runge--Kutta stepping with optional energy relaxation.

A relaxed step moves the state along the usual RK direction ``d`` but by
``gamma * dt`` instead of ``dt``, where ``gamma`` is the root near 1 of the
scalar equation ``E(y + gamma dt d) = E(y)``. Time advances by ``gamma * dt``
as well; the stages themselves always use the nominal ``dt``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalFailure
from .functionals import InvariantRecord, invariants, relaxation_coefficients
from .mesh import ConfigurationError, FemFunction
from .semidisc import Forcing, MixedState, Semidiscretization

GAMMA_WINDOW = (0.5, 1.5)


class RelaxationError(NumericalFailure):
    pass


@dataclass(frozen=True)
class ButcherTableau:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    order: int

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        s = len(self.b)
        if A.shape != (s, s) or len(self.c) != s:
            raise ValueError("inconsistent tableau shapes")
        if np.any(np.triu(A) != 0.0):
            raise ValueError("explicit tableau must be strictly lower triangular")
        if not math.isclose(sum(self.b), 1.0, rel_tol=0, abs_tol=1e-14):
            raise ValueError("weights must sum to 1")
        if not np.allclose(A.sum(axis=1), self.c, rtol=0, atol=1e-14):
            raise ValueError("c must equal the row sums of A")

    @property
    def stages(self) -> int:
        return len(self.b)


def classic_rk4() -> ButcherTableau:
    A = np.zeros((4, 4))
    A[1, 0] = A[2, 1] = 0.5
    A[3, 2] = 1.0
    return ButcherTableau(A, np.array([1, 2, 2, 1]) / 6.0, np.array([0.0, 0.5, 0.5, 1.0]), 4)


def forward_euler() -> ButcherTableau:
    return ButcherTableau(np.zeros((1, 1)), np.array([1.0]), np.array([0.0]), 1)


def rk_direction(rhs, y, t, dt, tableau: ButcherTableau):
    """Combined slope ``d = sum_i b_i f_i`` and the stage slopes ``f_i``."""
    slopes = []
    for i in range(tableau.stages):
        yi = y
        for j in range(i):
            if tableau.A[i, j] != 0.0:
                yi = yi + dt * tableau.A[i, j] * slopes[j]
        slopes.append(rhs(t + tableau.c[i] * dt, yi))
    d = sum(bi * fi for bi, fi in zip(tableau.b, slopes) if bi != 0.0)
    return d, slopes


@dataclass
class RelaxationConfig:
    enabled: bool = True
    root_tol: float = 1e-10
    max_secant_iter: int = 50


def _secant(fun, x0, x1, tol, max_iter):
    f0, f1 = fun(x0), fun(x1)
    for it in range(1, max_iter + 1):
        if f1 == 0.0:
            return x1, it
        if f1 == f0:
            raise RelaxationError("secant iteration stalled (flat residual)")
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        if not math.isfinite(x2):
            raise RelaxationError("secant iteration produced a non-finite iterate")
        x0, f0 = x1, f1
        x1, f1 = x2, fun(x2)
        if abs(x1 - x0) <= tol:
            # one polishing update, kept only if it is a genuine small correction
            # (near the root f0 and f1 may be pure rounding noise)
            if f1 != 0.0 and f1 != f0:
                x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
                if math.isfinite(x2) and abs(x2 - x1) <= abs(x1 - x0):
                    x1 = x2
            return x1, it
    raise RelaxationError(f"secant iteration did not converge in {max_iter} iterations")


def energy_cubic(coeffs, dt):
    """``E(y + gamma dt d) - E(y)`` as a function of ``gamma``."""
    A, B, G = coeffs

    def phi(gamma):
        tau = gamma * dt
        return 0.5 * tau * (G + tau * (B + tau * A))

    return phi


def solve_gamma(H, U, d_eta, d_u, dt, config: RelaxationConfig | None = None, gamma_prev=None):
    """Relaxation parameter for one step; returns ``(gamma, secant_iterations)``."""
    config = config or RelaxationConfig()
    coeffs = relaxation_coefficients(H, U, d_eta, d_u)
    return solve_gamma_from_coefficients(coeffs, dt, config, gamma_prev)


def solve_gamma_from_coefficients(coeffs, dt, config: RelaxationConfig, gamma_prev=None):
    A, B, G = coeffs
    if A == 0.0 and B == 0.0 and G == 0.0:
        return 1.0, 0
    g0 = 1.0 if gamma_prev is None else gamma_prev
    gamma, iters = _secant(energy_cubic(coeffs, dt), g0, g0 + dt * dt,
                           config.root_tol, config.max_secant_iter)
    lo, hi = GAMMA_WINDOW
    if not lo < gamma < hi:
        raise RelaxationError(f"relaxation parameter {gamma!r} outside ({lo}, {hi}); dt too large?")
    return gamma, iters


@dataclass
class StepRecord:
    t: float
    gamma: float
    secant_iterations: int = 0
    invariants: InvariantRecord | None = None


@dataclass
class Integrator:
    """RK (optionally relaxed) time stepper for one semidiscretisation."""

    semi: Semidiscretization
    tableau: ButcherTableau = field(default_factory=classic_rk4)
    relaxation: RelaxationConfig = field(default_factory=RelaxationConfig)
    forcing: Forcing | None = None

    def __post_init__(self):
        if self.relaxation.enabled:
            if self.forcing is not None:
                raise ConfigurationError("relaxation requires the homogeneous system (no forcing)")
            if not self.semi.conservative:
                raise ConfigurationError("relaxation is only defined for the conservative scheme")
        self._gamma_prev = None

    def _rhs(self, t, y):
        return self.semi.rhs(t, y, self.forcing)

    def invariants(self, state: MixedState) -> InvariantRecord:
        f = self.semi.functions(state)
        return invariants(f["H"], f.get("W"), f["U"], f.get("V"), state.t)

    def step(self, state: MixedState, dt: float, *, nominal_time=None):
        """Advance one step; returns ``(new_state, StepRecord)``."""
        if not dt > 0:
            raise ValueError("dt must be positive")
        semi = self.semi
        y = semi.pack(state)
        d, _ = rk_direction(self._rhs, y, state.t, dt, self.tableau)
        gamma, iters = 1.0, 0
        if self.relaxation.enabled:
            sl = semi.slices
            gamma, iters = solve_gamma(
                FemFunction(semi.eta_space, y[sl["H"]]),
                FemFunction(semi.u_space, y[sl["U"]]),
                FemFunction(semi.eta_space, d[sl["H"]]),
                FemFunction(semi.u_space, d[sl["U"]]),
                dt,
                self.relaxation,
                self._gamma_prev,
            )
            self._gamma_prev = gamma
        y_new = y + (gamma * dt) * d
        if not np.all(np.isfinite(y_new)):
            raise NumericalFailure(f"non-finite state after step from t={state.t}")
        t_new = state.t + gamma * dt if nominal_time is None else nominal_time
        return semi.unpack(y_new, t_new), StepRecord(t_new, gamma, iters)

    def integrate(self, state: MixedState, T: float, dt: float, stride: int = 1, callback=None):
        """Step until the (relaxed) time reaches or passes ``T``.

        Every step yields a record; invariants are attached at the initial time,
        every ``stride`` steps and at the final step. ``callback(state, record)`` is called after
        every step. Returns ``(final_state, records)``.
        """
        if not T > state.t:
            raise ValueError("T must exceed the initial time")
        self._gamma_prev = None
        t0 = state.t
        records = [StepRecord(t0, 1.0, 0, self.invariants(state))]
        # guard against landing a hair below T through rounding of n * dt
        eps = 1e-9 * dt
        n = 0
        while state.t < T - eps:
            n += 1
            nominal = None if self.relaxation.enabled else t0 + n * dt
            state, rec = self.step(state, dt, nominal_time=nominal)
            last = not state.t < T - eps
            if n % stride == 0 or last:
                rec.invariants = self.invariants(state)
            records.append(rec)
            if callback is not None:
                callback(state, rec)
        return state, records
