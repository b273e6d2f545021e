import numpy as np
import pytest
from hypothesis import given, strategies as st

from bbmfem.functionals import energy, invariants, relaxation_coefficients
from bbmfem.mesh import Bc, FemFunction, build_space, interpolate

scales = st.floats(0.01, 2.0)


def _random(space, rng, scale):
    return FemFunction(space, scale * rng.normal(size=space.dof_count))


@given(seed=st.integers(0, 10_000), r=st.integers(1, 4), tau=st.floats(-1.0, 1.0), scale=scales)
def test_relaxation_cubic_identity(seed, r, tau, scale):
    rng = np.random.default_rng(seed)
    hs, us = build_space(0, 3, 5, r, Bc.FREE), build_space(0, 3, 5, r, Bc.ZERO)
    H, dH = _random(hs, rng, scale), _random(hs, rng, scale)
    U, dU = _random(us, rng, scale), _random(us, rng, scale)
    A, B, G = relaxation_coefficients(H, U, dH, dU)
    moved = energy(FemFunction(hs, H.values + tau * dH.values), FemFunction(us, U.values + tau * dU.values))
    predicted = energy(H, U) + 0.5 * (G * tau + B * tau**2 + A * tau**3)
    assert moved == pytest.approx(predicted, rel=1e-11, abs=1e-13)


def test_invariants_of_known_fields():
    space = build_space(0.0, 2.0, 4, 1, Bc.PERIODIC)
    H = interpolate(space, lambda x: 0.5 + 0 * x)
    U = interpolate(space, lambda x: 2.0 + 0 * x)
    rec = invariants(H, None, U, None, t=1.5)
    assert rec.t == 1.5
    assert rec.mass == pytest.approx(1.0)
    assert rec.momentum == pytest.approx(4.0)
    assert rec.impulse == pytest.approx(2.0)
    assert rec.energy == pytest.approx(0.5 * (0.25 + 1.5 * 4.0) * 2.0)
    assert energy(H, U) == pytest.approx(rec.energy)


def test_impulse_includes_derivative_term():
    space = build_space(0.0, 2 * np.pi, 64, 3, Bc.PERIODIC)
    H = interpolate(space, np.sin)
    U = interpolate(space, np.sin)
    rec = invariants(H, None, U, None)
    assert rec.impulse == pytest.approx(np.pi * (1 + 1 / 6), rel=1e-6)


def test_mismatched_meshes_rejected():
    a = build_space(0, 1, 4, 1, Bc.FREE)
    b = build_space(0, 1, 5, 1, Bc.FREE)
    with pytest.raises(ValueError):
        energy(FemFunction(a, np.zeros(5)), FemFunction(b, np.zeros(6)))
