"""Error indicators: norm errors, convergence rates, solitary-wave tracking
errors and invariant drift.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NumericalFailure
from .mesh import FemFunction, FemSpace, evaluate, gauss_legendre, interpolate, quadrature_for

BISECTION_TOL = 1e-10
WINDOW_CELLS = 10

REFERENCE_MODES = ("exact", "interpolant")


class TrackingLost(NumericalFailure):
    """The solitary pulse left the search window."""


# -- norm errors ---------------------------------------------------------------------------


def _error_rule(space: FemSpace):
    return quadrature_for(2 * space.degree + 6)


def _reference_values(space: FemSpace, f: Callable, rule, reference: str, derivative=False):
    """Reference field at the quadrature points.

    ``exact`` evaluates ``f`` pointwise; ``interpolant`` uses its nodal
    interpolant in ``space`` (differentiated cellwise when ``derivative``).
    """
    if reference == "exact":
        return f(space.quad_points(rule).ravel())
    if reference == "interpolant":
        return space.at_quad(interpolate(space, f).values, rule, derivative=derivative)
    raise ValueError(f"unknown reference mode {reference!r}; expected one of {REFERENCE_MODES}")


def norm_error(func: FemFunction, exact: Callable, exact_deriv: Callable | None = None,
               s: int = 0, reference: str = "exact") -> float:
    """``||func - exact||_s`` for ``s`` in ``{0, 1}``.

    With ``reference="interpolant"`` the exact field is replaced by its nodal
    interpolant in ``func``'s space, and the derivative term compares
    cellwise derivatives of the two.
    """
    if s not in (0, 1):
        raise ValueError("s must be 0 or 1")
    space = func.space
    rule = _error_rule(space)
    w = space.quad_weights(rule)
    diff = space.at_quad(func.values, rule) - _reference_values(space, exact, rule, reference)
    total = float(w @ (diff * diff))
    if s == 1:
        if reference == "interpolant":
            ref_x = _reference_values(space, exact, rule, reference, derivative=True)
        else:
            if exact_deriv is None:
                raise ValueError("the H1 error needs the exact derivative")
            ref_x = _reference_values(space, exact_deriv, rule, reference)
        dd = space.at_quad(func.values, rule, derivative=True) - ref_x
        total += float(w @ (dd * dd))
    return math.sqrt(total)


def modified_h1_error(H: FemFunction, W: FemFunction, exact: Callable, exact_deriv: Callable,
                      reference: str = "exact") -> float:
    """``sqrt(||H - eta||^2 + ||W - eta_x||^2)`` with ``W`` the carried derivative field."""
    e_h = norm_error(H, exact, s=0, reference=reference)
    e_w = norm_error(W, exact_deriv, s=0, reference=reference)
    return math.hypot(e_h, e_w)


def convergence_rates(errors: Sequence[float], dxs: Sequence[float]) -> list:
    """Experimental rates between consecutive refinements; ``None`` where undefined."""
    if len(errors) != len(dxs):
        raise ValueError("errors and dxs must have equal length")
    if any(d1 >= d0 for d0, d1 in zip(dxs, dxs[1:])):
        raise ValueError("dxs must be strictly decreasing")
    rates = []
    for (e0, e1), (d0, d1) in zip(zip(errors, errors[1:]), zip(dxs, dxs[1:])):
        if not (e0 > 0 and e1 > 0) or not (math.isfinite(e0) and math.isfinite(e1)):
            rates.append(None)
        else:
            rates.append(math.log(e0 / e1) / math.log(d0 / d1))
    return rates


@dataclass
class ErrorRow:
    dx: float
    E0_H: float
    E0_U: float
    E1_H: float
    E1_U: float
    tE1_H: float = float("nan")
    tE1_U: float = float("nan")


@dataclass
class ErrorReport:
    """Errors per refinement and rates between consecutive refinements."""

    rows: list = field(default_factory=list)

    ERROR_KEYS = ("E0_H", "E0_U", "E1_H", "E1_U", "tE1_H", "tE1_U")

    @property
    def dxs(self):
        return [row.dx for row in self.rows]

    def errors(self, key):
        return [getattr(row, key) for row in self.rows]

    def rates(self, key):
        if len(self.rows) < 2:
            return []
        return convergence_rates(self.errors(key), self.dxs)

    def terminal_rate(self, key):
        rates = self.rates(key)
        return rates[-1] if rates else None


# -- peak tracking -------------------------------------------------------------------------


def _bisect(fun, lo, hi, tol, f_lo=None, f_hi=None):
    """Root of ``fun`` in ``[lo, hi]`` given a sign change; absolute tolerance ``tol``."""
    f_lo = fun(lo) if f_lo is None else f_lo
    f_hi = fun(hi) if f_hi is None else f_hi
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise TrackingLost(f"no sign change on [{lo:.6g}, {hi:.6g}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = fun(mid)
        if f_mid == 0.0:
            return mid
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return 0.5 * (lo + hi)




def track_peak(H: FemFunction, window_center: float, window: float | None = None,
               tol: float = BISECTION_TOL) -> float:
    """Location of the maximum of ``H`` near ``window_center``.

    Piecewise linear functions peak at nodes, so for ``r = 1`` the node with
    the largest value inside the window is returned. Otherwise ``H'`` is
    bisected on the window. In periodic domains the result is on the same
    branch as ``window_center`` (no wrapping).
    """
    space = H.space
    dx = space.dx
    half = 0.5 * (WINDOW_CELLS * dx if window is None else window)
    lo, hi = window_center - half, window_center + half
    if not space.periodic:
        lo, hi = max(lo, space.mesh.a), min(hi, space.mesh.b)
        if hi <= lo:
            raise TrackingLost(f"window around {window_center} lies outside the domain")

    if space.degree == 1:
        a = space.mesh.a
        j = np.arange(math.ceil((lo - a) / dx - 1e-9), math.floor((hi - a) / dx + 1e-9) + 1)
        nodes = a + j * dx
        vals = evaluate(H, nodes)[0]
        k = int(np.argmax(vals))
        if (k == 0 or k == len(nodes) - 1) and len(nodes) > 2:
            raise TrackingLost(f"peak at the edge of the window around {window_center}")
        return float(nodes[k])

    def slope(x):
        return float(evaluate(H, np.array([x]))[1][0])

    return float(_bisect(slope, lo, hi, tol))


# -- solitary-wave errors --------------------------------------------------------------------


@dataclass(frozen=True)
class WaveTrackRecord:
    t: float
    x_star: float
    E_amp: float
    E_phase: float
    E_shape: float


class ShiftedProfile:
    """A reference profile ``eta(x)`` that can be translated and differentiated.

    Outside a non-periodic domain the profile is taken to be zero.
    """

    def __init__(self, profile: FemFunction):
        self.profile = profile
        self.space = profile.space

    def __call__(self, x, shift=0.0):
        return self._eval(np.asarray(x, dtype=float) - shift)[0]

    def derivative(self, x, shift=0.0):
        return self._eval(np.asarray(x, dtype=float) - shift)[1]

    def values_and_derivatives(self, x, shift=0.0):
        return self._eval(np.asarray(x, dtype=float) - shift)

    def _eval(self, y):
        if self.space.periodic:
            return evaluate(self.profile, y)
        mesh = self.space.mesh
        inside = (y >= mesh.a) & (y <= mesh.b)
        val = np.zeros_like(y)
        der = np.zeros_like(y)
        if np.any(inside):
            v, d = evaluate(self.profile, y[inside])
            val[inside], der[inside] = v, d
        return val, der


class ShapeErrorSolver:
    """Best-fit translation of a reference profile onto ``H``.

    ``zeta(s) = ||H - eta(. - c s)|| / ||eta||`` with L2 norms from 3-point
    Gauss--Legendre on each cell of ``H``'s mesh.
    """

    def __init__(self, reference: ShiftedProfile, c_s: float, space: FemSpace):
        self.reference = reference
        self.c_s = float(c_s)
        self.space = space
        self.rule = gauss_legendre(3)
        self.x = space.quad_points(self.rule).ravel()
        self.w = space.quad_weights(self.rule)
        ref0 = reference(self.x)
        self.ref_norm = math.sqrt(self.w @ (ref0 * ref0))

    def zeta(self, h_vals, s):
        diff = h_vals - self.reference(self.x, self.c_s * s)
        return math.sqrt(self.w @ (diff * diff)) / self.ref_norm

    def dzeta2(self, h_vals, s):
        ref, ref_x = self.reference.values_and_derivatives(self.x, self.c_s * s)
        # d/ds eta(x - c s) = -c eta'(x - c s)
        return 2.0 * self.c_s * (self.w @ ((h_vals - ref) * ref_x)) / self.ref_norm**2

    def minimise(self, H: FemFunction, t: float, tol: float = BISECTION_TOL):
        """Minimiser ``s`` (near ``t``) and ``zeta(s)``."""
        if H.space.same_mesh(self.space):
            h_vals = H.space.at_quad(H.values, self.rule)
        else:
            h_vals = evaluate(H, self.x)[0]
        half = WINDOW_CELLS * H.space.dx / self.c_s
        s = _bisect(lambda s: self.dzeta2(h_vals, s), t - half, t + half, tol)
        return s, self.zeta(h_vals, s)


def shape_error_solver(reference: FemFunction, c_s: float, space: FemSpace) -> ShapeErrorSolver:
    return ShapeErrorSolver(ShiftedProfile(reference), c_s, space)


def wave_errors(H: FemFunction, t: float, reference_profile, c_s: float, H0: float,
                x0: float = 0.0, window_center: float | None = None,
                shape_solver: ShapeErrorSolver | None = None) -> WaveTrackRecord:
    """Amplitude, phase and shape errors of ``H`` at time ``t``.

    ``reference_profile`` is the initial wave (a :class:`FemFunction`),
    translated by ``c_s * s`` for the shape fit. ``x0`` is the initial crest
    position; the tracking window is centred at ``window_center`` (default
    ``x0 + c_s * t``). Positions are unwrapped in periodic domains.
    """
    if window_center is None:
        window_center = x0 + c_s * t
    x_star = track_peak(H, window_center)
    amp = float(evaluate(H, np.array([x_star]))[0][0])
    if shape_solver is None:
        shape_solver = shape_error_solver(reference_profile, c_s, H.space)
    _, shape = shape_solver.minimise(H, t)
    return WaveTrackRecord(
        t=float(t),
        x_star=x_star,
        E_amp=abs(amp - H0) / abs(H0),
        E_phase=abs(x_star - c_s * t - x0),
        E_shape=shape,
    )


# -- invariant drift -------------------------------------------------------------------------

INVARIANT_NAMES = ("mass", "momentum", "impulse", "energy")


def expected_conserved(bc, scheme="conservative") -> frozenset:
    """Invariants the semidiscrete scheme preserves for the boundary condition."""
    bc = getattr(bc, "value", bc)
    scheme = getattr(scheme, "value", scheme)
    if scheme == "standard":
        base = {"mass"}
        return frozenset(base | {"momentum", "impulse"} if bc == "periodic" else base)
    if bc == "periodic":
        return frozenset({"mass", "momentum", "energy"})
    return frozenset({"mass", "energy"})


@dataclass(frozen=True)
class DriftReport:
    E_mass: float
    E_momentum: float
    E_impulse: float
    E_energy: float
    expected: frozenset = frozenset()

    def as_dict(self):
        return {name: getattr(self, "E_" + name) for name in INVARIANT_NAMES}

    def expected_drifts(self):
        return {k: v for k, v in self.as_dict().items() if k in self.expected}

    def max_expected(self) -> float:
        vals = list(self.expected_drifts().values())
        return max(vals) if vals else 0.0


def drift_report(series, bc=None, scheme="conservative") -> DriftReport:
    """``E_K = max_n |K(t^n) - K(t^0)|`` over a series of invariant records."""
    series = [rec for rec in series if rec is not None]
    if not series:
        raise ValueError("empty invariant series")
    first = series[0]
    drifts = {}
    for name in INVARIANT_NAMES:
        k0 = getattr(first, name)
        drifts["E_" + name] = max(abs(getattr(rec, name) - k0) for rec in series)
    expected = expected_conserved(bc, scheme) if bc is not None else frozenset()
    return DriftReport(expected=expected, **drifts)
