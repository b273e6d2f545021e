"""Initial data: exact travelling waves, manufactured solutions and the
Petviashvili solver for classical solitary waves.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import NumericalFailure
from .linalg import factor
from .mesh import (
    Bc,
    ConfigurationError,
    FemFunction,
    FemSpace,
    UniformMesh,
    assemble_cross_mass,
    interpolate,
    l2_project,
    project_broken_derivative,
    project_function,
    quadrature_for,
)
from .semidisc import BoundaryKind, Forcing, make_spaces

# -- exact travelling wave (D = g = 1) -----------------------------------------------------

_K = 3.0 / math.sqrt(10.0)
EXACT_WAVE_SPEED = 2.5


def _sech(z):
    return 1.0 / np.cosh(z)


def exact_travelling_wave(x, t, direction: int = +1):
    """Closed-form travelling wave ``(eta, u)`` moving with speed ``direction * 5/2``.

    The wave has ``1 + eta < 0`` near its crest, so it is only useful as a
    test solution.
    """
    s = np.asarray(x) - direction * EXACT_WAVE_SPEED * np.asarray(t)
    sech2 = _sech(_K * s) ** 2
    eta = 3.75 * (np.cosh(2.0 * _K * s) - 2.0) * sech2 * sech2
    u = direction * 7.5 * sech2
    return eta, u


def exact_travelling_wave_derivatives(x, t, direction: int = +1):
    """x-derivatives ``(eta_x, u_x)`` of :func:`exact_travelling_wave`."""
    s = np.asarray(x) - direction * EXACT_WAVE_SPEED * np.asarray(t)
    z = _K * s
    sech2 = _sech(z) ** 2
    tanh = np.tanh(z)
    eta_x = 3.75 * _K * sech2 * sech2 * (
        2.0 * np.sinh(2.0 * z) - 4.0 * (np.cosh(2.0 * z) - 2.0) * tanh
    )
    u_x = -direction * 15.0 * _K * sech2 * tanh
    return eta_x, u_x


# -- manufactured solutions -----------------------------------------------------------------


@dataclass(frozen=True)
class ManufacturedCase:
    """Closed-form fields, their x-derivatives and the forcing they induce.

    Every callable takes ``(x, t)`` and an optional math backend ``m``
    (``numpy`` by default; ``mpmath`` works for scalar arguments).
    """

    bc: BoundaryKind
    interval: tuple
    eta: Callable
    u: Callable
    eta_x: Callable
    u_x: Callable
    forcing_eta: Callable
    forcing_u: Callable

    def forcing(self) -> Forcing:
        return Forcing(eta=self.forcing_eta, u=self.forcing_u)


def _reflective_case() -> ManufacturedCase:
    pi = math.pi

    def eta(x, t, m=np):
        return m.exp(2 * t) * m.cos(pi * x)

    def u(x, t, m=np):
        return m.exp(t) * x * m.sin(pi * x)

    def eta_x(x, t, m=np):
        return -pi * m.exp(2 * t) * m.sin(pi * x)

    def u_x(x, t, m=np):
        return m.exp(t) * (m.sin(pi * x) + pi * x * m.cos(pi * x))

    def u_xx(x, t, m=np):
        return m.exp(t) * (2 * pi * m.cos(pi * x) - pi**2 * x * m.sin(pi * x))

    def forcing_eta(x, t, m=np):
        # eta_t = 2 eta and eta_xxt = -2 pi^2 eta
        e = eta(x, t, m)
        return 2 * e + eta_x(x, t, m) * u(x, t, m) + (1 + e) * u_x(x, t, m) + pi**2 / 3 * e

    def forcing_u(x, t, m=np):
        # u_t = u and u_xxt = u_xx
        v = u(x, t, m)
        return v + eta_x(x, t, m) + v * u_x(x, t, m) - u_xx(x, t, m) / 6

    return ManufacturedCase(BoundaryKind.REFLECTIVE, (0.0, 1.0), eta, u, eta_x, u_x,
                            forcing_eta, forcing_u)


def _periodic_case() -> ManufacturedCase:
    pi = math.pi
    c = 1 + 2 * pi**2 / 3  # (1 - d_xx / 6) acting on a 1-periodic sine mode

    def eta(x, t, m=np):
        return m.exp(t) * m.sin(2 * pi * (x - 2 * t))

    def u(x, t, m=np):
        return m.exp(t / 2) * m.sin(2 * pi * (x - t / 2))

    def eta_x(x, t, m=np):
        return 2 * pi * m.exp(t) * m.cos(2 * pi * (x - 2 * t))

    def u_x(x, t, m=np):
        return 2 * pi * m.exp(t / 2) * m.cos(2 * pi * (x - t / 2))

    def eta_t(x, t, m=np):
        return m.exp(t) * (m.sin(2 * pi * (x - 2 * t)) - 4 * pi * m.cos(2 * pi * (x - 2 * t)))

    def u_t(x, t, m=np):
        return m.exp(t / 2) * (0.5 * m.sin(2 * pi * (x - t / 2)) - pi * m.cos(2 * pi * (x - t / 2)))

    def forcing_eta(x, t, m=np):
        return c * eta_t(x, t, m) + eta_x(x, t, m) * u(x, t, m) + (1 + eta(x, t, m)) * u_x(x, t, m)

    def forcing_u(x, t, m=np):
        return c * u_t(x, t, m) + eta_x(x, t, m) + u(x, t, m) * u_x(x, t, m)

    return ManufacturedCase(BoundaryKind.PERIODIC, (0.0, 1.0), eta, u, eta_x, u_x,
                            forcing_eta, forcing_u)


# mpmath precision is process-global, so concurrent callers must not interleave
_MP_LOCK = threading.RLock()


def pde_residual_fd(case: ManufacturedCase, x, t, h=1e-4, dps=40):
    """BBM-BBM residual of the exact fields by centred finite differences.

    Fourth-order stencils evaluated in ``dps``-digit arithmetic, so the
    result depends only on the closed-form ``eta`` and ``u``.
    """
    import mpmath

    with _MP_LOCK, mpmath.workdps(dps):
        x, t, h = mpmath.mpf(x), mpmath.mpf(t), mpmath.mpf(h)
        d1 = [(-2, 1), (-1, -8), (1, 8), (2, -1)]  # /12h
        d2 = [(-2, -1), (-1, 16), (0, -30), (1, 16), (2, -1)]  # /12h^2

        def e(xx, tt):
            return case.eta(xx, tt, mpmath)

        def v(xx, tt):
            return case.u(xx, tt, mpmath)

        def dx(f, xx, tt):
            return sum(w * f(xx + k * h, tt) for k, w in d1) / (12 * h)

        def dt(f, xx, tt):
            return sum(w * f(xx, tt + k * h) for k, w in d1) / (12 * h)

        def dxx(f, xx, tt):
            return sum(w * f(xx + k * h, tt) for k, w in d2) / (12 * h * h)

        def dxxt(f, xx, tt):
            return sum(w * dxx(f, xx, tt + k * h) for k, w in d1) / (12 * h)

        def flux(xx, tt):
            return (1 + e(xx, tt)) * v(xx, tt)

        def half_u2(xx, tt):
            return v(xx, tt) ** 2 / 2

        r_eta = dt(e, x, t) + dx(flux, x, t) - dxxt(e, x, t) / 6
        r_u = dt(v, x, t) + dx(e, x, t) + dx(half_u2, x, t) - dxxt(v, x, t) / 6
        return float(r_eta), float(r_u)


def validate_forcing(case: ManufacturedCase, n_points=200, seed=0, tol=1e-6):
    """Max deviation between the coded forcing and the finite-difference residual."""
    import mpmath

    rng = np.random.default_rng(seed)
    a, b = case.interval
    worst = 0.0
    with _MP_LOCK:
        for x, t in zip(rng.uniform(a, b, n_points), rng.uniform(0.0, 1.0, n_points)):
            r_eta, r_u = pde_residual_fd(case, x, t)
            f_eta = float(case.forcing_eta(mpmath.mpf(x), mpmath.mpf(t), mpmath))
            f_u = float(case.forcing_u(mpmath.mpf(x), mpmath.mpf(t), mpmath))
            worst = max(worst, abs(r_eta - f_eta), abs(r_u - f_u))
    if worst > tol:
        raise ConfigurationError(f"forcing disagrees with the PDE residual by {worst:.3e}")
    return worst


@lru_cache(maxsize=None)
def manufactured_case(bc, validate: bool = True) -> ManufacturedCase:
    """Manufactured solution on ``[0, 1]`` for reflective or periodic boundaries."""
    try:
        bc = BoundaryKind(bc)
    except ValueError:
        raise ConfigurationError(f"no manufactured solution for boundary condition {bc!r}")
    case = _reflective_case() if bc is BoundaryKind.REFLECTIVE else _periodic_case()
    if validate:
        validate_forcing(case, n_points=20)
    return case


# -- Petviashvili iteration ------------------------------------------------------------------


class PetviashviliError(NumericalFailure):
    def __init__(self, message, residual_history=()):
        super().__init__(message)
        self.residual_history = list(residual_history)


def petviashvili_initial_guess(c_s: float, center: float = 0.0):
    """``sech^2`` profile ``(eta0, u0)`` used to seed the iteration."""
    if not c_s > 1.0:
        raise ConfigurationError(f"solitary waves need c_s > 1, got {c_s}")
    amp = c_s * c_s - 1.0
    lam = math.sqrt(0.75 * amp)

    def eta0(x):
        return amp * _sech(lam * (np.asarray(x) - center)) ** 2

    def u0(x):
        e = eta0(x)
        return c_s * e / (1.0 + e)

    return eta0, u0


@dataclass
class TravellingWave:
    c_s: float
    center: float
    eta: FemFunction
    u: FemFunction
    eta_x: FemFunction
    u_x: FemFunction
    residual_history: list = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.residual_history) - 1

    @property
    def space(self) -> FemSpace:
        return self.eta.space

    @property
    def amplitude(self) -> float:
        from .diagnostics import track_peak

        x_star = track_peak(self.eta, self.center)
        return float(self.eta(x_star))


class _PetviashviliOperator:
    """Bilinear form of the travelling-wave equations and the quadratic nonlinearity."""

    def __init__(self, eta_space: FemSpace, u_space: FemSpace, c_s: float):
        self.eta_space, self.u_space = eta_space, u_space
        self.n_eta = eta_space.dof_count
        diag_eta = c_s * (eta_space.mass() + eta_space.stiffness() / 6.0)
        diag_u = c_s * (u_space.mass() + u_space.stiffness() / 6.0)
        cross = assemble_cross_mass(eta_space, u_space)
        self.matrix = sp.bmat([[diag_eta, -cross], [-cross.T, diag_u]], format="csr")
        self.factor = factor(self.matrix)
        self.rule = quadrature_for(3 * eta_space.degree)
        self.norm_rule = quadrature_for(2 * eta_space.degree)

    def split(self, w):
        return w[: self.n_eta], w[self.n_eta :]

    def nonlinear_load(self, w):
        eta, u = self.split(w)
        h = self.eta_space.at_quad(eta, self.rule)
        v = self.u_space.at_quad(u, self.rule)
        return np.concatenate([
            self.eta_space.load(h * v, self.rule),
            self.u_space.load(0.5 * v * v, self.rule),
        ])

    def l2_norm(self, w):
        eta, u = self.split(w)
        rule, sp_e, sp_u = self.norm_rule, self.eta_space, self.u_space
        wts = sp_e.quad_weights(rule)
        h = sp_e.at_quad(eta, rule)
        v = sp_u.at_quad(u, rule)
        return math.sqrt(wts @ (h * h + v * v))


def petviashvili_solve(
    a: float,
    b: float,
    n_cells: int,
    r: int,
    c_s: float,
    bc=BoundaryKind.PERIODIC,
    center: float | None = None,
    exponent: float = 2.0,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> TravellingWave:
    """Classical solitary wave of speed ``c_s`` by Petviashvili iteration.

    ``eta`` and ``u`` live in the ``H`` and ``U`` spaces of the chosen boundary
    condition; ``eta_x`` and ``u_x`` are L2 projections of their cellwise
    derivatives onto the ``W`` and ``V`` spaces.
    """
    mesh = UniformMesh(float(a), float(b), int(n_cells))
    eta_space, w_space, u_space, v_space = make_spaces(mesh, r, bc)
    if center is None:
        center = 0.5 * (mesh.a + mesh.b)
    eta0, u0 = petviashvili_initial_guess(c_s, center)
    op = _PetviashviliOperator(eta_space, u_space, c_s)
    w = np.concatenate([l2_project(eta_space, eta0).values, l2_project(u_space, u0).values])

    history = []
    for it in range(max_iter + 1):
        nl = op.nonlinear_load(w)
        lww = w @ (op.matrix @ w)
        nww = nl @ w
        history.append(abs(lww - nww) / op.l2_norm(w))
        if history[-1] < tol:
            break
        if it == max_iter:
            raise PetviashviliError(
                f"no convergence in {max_iter} iterations (R = {history[-1]:.3e})", history
            )
        if abs(nww) < 1e-14:
            raise PetviashviliError("degenerate stabilising factor (N(w), w) ~ 0", history)
        stab = (lww / nww) ** exponent
        w = stab * op.factor.solve(nl)
        if not np.all(np.isfinite(w)):
            raise PetviashviliError("iteration diverged", history)

    eta_vals, u_vals = op.split(w)
    eta = FemFunction(eta_space, eta_vals.copy())
    u = FemFunction(u_space, u_vals.copy())
    return TravellingWave(
        c_s=float(c_s),
        center=float(center),
        eta=eta,
        u=u,
        eta_x=project_broken_derivative(eta, w_space),
        u_x=project_broken_derivative(u, v_space),
        residual_history=history,
    )


def transfer_wave(wave: TravellingWave, r: int, method: str = "interpolate") -> TravellingWave:
    """Move a wave to degree ``r`` spaces on the same mesh and boundary condition.

    ``interpolate`` takes nodal values of all four fields; ``project`` uses L2
    projections of ``eta``, ``u`` and of their cellwise derivatives.
    """
    bc = BoundaryKind.PERIODIC if wave.eta.space.periodic else BoundaryKind.REFLECTIVE
    eta_s, w_s, u_s, v_s = make_spaces(wave.eta.space.mesh, r, bc)
    if method == "interpolate":
        fields = [interpolate(eta_s, wave.eta), interpolate(w_s, wave.eta_x),
                  interpolate(u_s, wave.u), interpolate(v_s, wave.u_x)]
    elif method == "project":
        fields = [project_function(wave.eta, eta_s), project_broken_derivative(wave.eta, w_s),
                  project_function(wave.u, u_s), project_broken_derivative(wave.u, v_s)]
    else:
        raise ConfigurationError(f"unknown transfer method {method!r}")
    return TravellingWave(wave.c_s, wave.center, fields[0], fields[2], fields[1], fields[3],
                          list(wave.residual_history))
