"""Galerkin semidiscretisations of the BBM-BBM system (g = D = 1).

Two schemes are provided:

* ``CONSERVATIVE`` -- the mixed formulation. Besides the elevation ``H`` and
  velocity ``U`` it carries ``W ~ eta_x`` and ``V ~ u_x``; the nonlinear fluxes
  are L2-projected before they are tested against derivatives, which makes
  the semidiscrete energy an exact invariant.
* ``STANDARD`` -- the plain Galerkin method on ``(H, U)``.

Reflective problems use ``H, V`` in the free space and ``W, U`` in the
zero-endpoint space; periodic problems put everything in the periodic space.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .linalg import SaddleOperator, factor
from .mesh import (
    Bc,
    ConfigurationError,
    FemFunction,
    FemSpace,
    UniformMesh,
    assemble_coupling,
    l2_project,
    quadrature_for,
    transcendental_rule,
)


class SchemeKind(enum.Enum):
    CONSERVATIVE = "conservative"
    STANDARD = "standard"


class BoundaryKind(enum.Enum):
    PERIODIC = "periodic"
    REFLECTIVE = "reflective"


@dataclass(frozen=True)
class Forcing:
    """Source terms ``F_eta(x, t)`` and ``F_u(x, t)`` of the mass and momentum equations."""

    eta: Callable
    u: Callable


@dataclass(frozen=True)
class MixedState:
    """Coefficient vectors of ``(H, W, U, V)`` at time ``t``.

    ``W`` and ``V`` are ``None`` for the standard scheme.
    """

    H: np.ndarray
    U: np.ndarray
    W: Optional[np.ndarray] = None
    V: Optional[np.ndarray] = None
    t: float = 0.0

    def with_time(self, t):
        return replace(self, t=t)


def make_spaces(mesh: UniformMesh, r: int, bc: BoundaryKind):
    """Spaces of ``(H, W, U, V)`` for the given boundary condition."""
    bc = BoundaryKind(bc)
    if bc is BoundaryKind.PERIODIC:
        s = FemSpace(mesh, r, Bc.PERIODIC)
        return s, s, s, s
    free = FemSpace(mesh, r, Bc.FREE)
    zero = FemSpace(mesh, r, Bc.ZERO)
    return free, zero, zero, free


class Semidiscretization:
    """Assembled and factored right-hand side of one scheme on one mesh."""

    def __init__(self, a, b, n_cells, r, bc, scheme=SchemeKind.CONSERVATIVE):
        self.mesh = UniformMesh(float(a), float(b), int(n_cells))
        self.r = int(r)
        self.bc = BoundaryKind(bc)
        self.scheme = SchemeKind(scheme)
        self.eta_space, self.w_space, self.u_space, self.v_space = make_spaces(
            self.mesh, self.r, self.bc
        )
        self.nonlinear_rule = quadrature_for(3 * self.r)
        self.forcing_rule = transcendental_rule(self.eta_space)

        if self.conservative:
            self.g_eta = assemble_coupling(self.eta_space, self.w_space)
            self.g_u = assemble_coupling(self.u_space, self.v_space)
            self.saddle_eta = SaddleOperator(self.eta_space.mass(), self.g_eta, self.w_space.mass())
            self.saddle_u = SaddleOperator(self.u_space.mass(), self.g_u, self.v_space.mass())
            self.saddle_eta.factor()
            self.saddle_u.factor()
            self.w_space.mass_factor()
            self.v_space.mass_factor()
            sizes = [self.eta_space.dof_count, self.w_space.dof_count,
                     self.u_space.dof_count, self.v_space.dof_count]
            names = ["H", "W", "U", "V"]
        else:
            self.op_eta = factor(self.eta_space.mass() + self.eta_space.stiffness() / 6.0)
            self.op_u = factor(self.u_space.mass() + self.u_space.stiffness() / 6.0)
            sizes = [self.eta_space.dof_count, self.u_space.dof_count]
            names = ["H", "U"]
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        self.slices = {n: slice(offsets[i], offsets[i + 1]) for i, n in enumerate(names)}
        self.size = int(offsets[-1])

    @property
    def conservative(self) -> bool:
        return self.scheme is SchemeKind.CONSERVATIVE

    @property
    def dx(self) -> float:
        return self.mesh.dx

    def spaces(self) -> dict:
        return {"H": self.eta_space, "W": self.w_space, "U": self.u_space, "V": self.v_space}

    # -- state packing -------------------------------------------------------------

    def pack(self, state: MixedState) -> np.ndarray:
        parts = [getattr(state, name) for name in self.slices]
        return np.concatenate(parts)

    def unpack(self, y: np.ndarray, t: float = 0.0) -> MixedState:
        blocks = {name: y[sl].copy() for name, sl in self.slices.items()}
        return MixedState(t=t, **blocks)

    def functions(self, state: MixedState) -> dict:
        out = {}
        for name, space in self.spaces().items():
            vals = getattr(state, name)
            if vals is not None:
                out[name] = FemFunction(space, vals)
        return out

    def initial_state(self, eta0, u0, eta0_x=None, u0_x=None, t=0.0) -> MixedState:
        """L2 projections of pointwise initial data onto the scheme's spaces."""
        H = l2_project(self.eta_space, eta0).values
        U = l2_project(self.u_space, u0).values
        if not self.conservative:
            return MixedState(H=H, U=U, t=t)
        if eta0_x is None or u0_x is None:
            raise ConfigurationError("the conservative scheme needs initial derivatives")
        W = l2_project(self.w_space, eta0_x).values
        V = l2_project(self.v_space, u0_x).values
        return MixedState(H=H, U=U, W=W, V=V, t=t)

    # -- right-hand sides ----------------------------------------------------------

    def _forcing_loads(self, forcing: Forcing | None, t: float):
        if forcing is None:
            return 0.0, 0.0
        rule = self.forcing_rule
        x = self.eta_space.quad_points(rule)
        fe = self.eta_space.load(forcing.eta(x, t), rule)
        fu = self.u_space.load(forcing.u(x, t), rule)
        return fe, fu

    def project_fluxes(self, H, U):
        """``f = P_W[(1 + H) U]`` and ``g = P_V[U^2 / 2 + H]``."""
        rule = self.nonlinear_rule
        h = self.eta_space.at_quad(H, rule)
        u = self.u_space.at_quad(U, rule)
        f = self.w_space.mass_factor().solve(self.w_space.load((1.0 + h) * u, rule))
        g = self.v_space.mass_factor().solve(self.v_space.load(0.5 * u * u + h, rule))
        return f, g

    def rhs_conservative(self, state: MixedState, forcing: Forcing | None = None):
        """Slopes ``(dH, dW, dU, dV)`` of the mixed scheme."""
        f, g = self.project_fluxes(state.H, state.U)
        fe, fu = self._forcing_loads(forcing, state.t)
        dH, dW = self.saddle_eta.solve(self.g_eta @ f + fe)
        dU, dV = self.saddle_u.solve(self.g_u @ g + fu)
        return dH, dW, dU, dV

    def rhs_standard(self, state: MixedState, forcing: Forcing | None = None):
        """Slopes ``(dH, dU)`` of the standard Galerkin scheme."""
        rule = self.nonlinear_rule
        h = self.eta_space.at_quad(state.H, rule)
        u = self.u_space.at_quad(state.U, rule)
        fe, fu = self._forcing_loads(forcing, state.t)
        load_eta = self.eta_space.load((1.0 + h) * u, rule, derivative=True) + fe
        load_u = self.u_space.load(0.5 * u * u + h, rule, derivative=True) + fu
        return self.op_eta.solve(load_eta), self.op_u.solve(load_u)

    def rhs(self, t: float, y: np.ndarray, forcing: Forcing | None = None) -> np.ndarray:
        """Packed right-hand side, the form consumed by the time integrators."""
        sl = self.slices
        if self.conservative:
            state = MixedState(H=y[sl["H"]], U=y[sl["U"]], W=y[sl["W"]], V=y[sl["V"]], t=t)
            return np.concatenate(self.rhs_conservative(state, forcing))
        state = MixedState(H=y[sl["H"]], U=y[sl["U"]], t=t)
        return np.concatenate(self.rhs_standard(state, forcing))


def setup(a, b, n_cells, r, bc, scheme=SchemeKind.CONSERVATIVE) -> Semidiscretization:
    return Semidiscretization(a, b, n_cells, r, bc, scheme)
