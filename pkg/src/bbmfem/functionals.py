"""Discrete mass, momentum, impulse and energy, and the relaxation cubic.

Integrals are evaluated cellwise with Gauss--Legendre rules exact for the
polynomial integrands (degree up to ``3r``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import FemFunction, quadrature_for


@dataclass(frozen=True)
class InvariantRecord:
    t: float
    mass: float
    momentum: float
    impulse: float
    energy: float


def _check_mesh(*funcs):
    mesh = funcs[0].space.mesh
    for f in funcs[1:]:
        if f.space.mesh != mesh:
            raise ValueError("functions live on different meshes")
    return funcs[0].space


def _cubic_rule(*funcs):
    return quadrature_for(3 * max(f.space.degree for f in funcs))


def invariants(H: FemFunction, W, U: FemFunction, V, t: float = 0.0) -> InvariantRecord:
    """Mass, momentum, impulse and energy of the state ``(H, U)``.

    ``W`` and ``V`` are accepted for interface symmetry but unused: the
    impulse uses the broken derivatives of ``H`` and ``U``.
    """
    space = _check_mesh(H, U)
    rule = _cubic_rule(H, U)
    w = space.quad_weights(rule)
    h = H.space.at_quad(H.values, rule)
    u = U.space.at_quad(U.values, rule)
    hx = H.space.at_quad(H.values, rule, derivative=True)
    ux = U.space.at_quad(U.values, rule, derivative=True)
    return InvariantRecord(
        t=float(t),
        mass=float(w @ h),
        momentum=float(w @ u),
        impulse=float(w @ (h * u + hx * ux / 6.0)),
        energy=float(0.5 * (w @ (h * h + (1.0 + h) * u * u))),
    )


def energy(H: FemFunction, U: FemFunction) -> float:
    space = _check_mesh(H, U)
    rule = _cubic_rule(H, U)
    h = H.space.at_quad(H.values, rule)
    u = U.space.at_quad(U.values, rule)
    return float(0.5 * (space.quad_weights(rule) @ (h * h + (1.0 + h) * u * u)))


def relaxation_coefficients(H, U, d_eta, d_u) -> tuple[float, float, float]:
    """Coefficients ``(A, B, Gamma)`` of the energy change along ``(d_eta, d_u)``.

    For ``tau = gamma * dt``::

        E(H + tau d_eta, U + tau d_u) - E(H, U) = (Gamma tau + B tau^2 + A tau^3) / 2
    """
    space = _check_mesh(H, U, d_eta, d_u)
    rule = _cubic_rule(H, U, d_eta, d_u)
    w = space.quad_weights(rule)
    h = H.space.at_quad(H.values, rule)
    u = U.space.at_quad(U.values, rule)
    de = d_eta.space.at_quad(d_eta.values, rule)
    du = d_u.space.at_quad(d_u.values, rule)
    A = w @ (de * du * du)
    B = w @ (de * de + (1.0 + h) * du * du + 2.0 * u * de * du)
    G = w @ ((2.0 * h + u * u) * de + 2.0 * u * (1.0 + h) * du)
    return float(A), float(B), float(G)
