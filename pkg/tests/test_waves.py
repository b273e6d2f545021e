import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bbmfem.mesh import ConfigurationError
from bbmfem.semidisc import BoundaryKind
from bbmfem.waves import (
    EXACT_WAVE_SPEED, PetviashviliError, exact_travelling_wave, exact_travelling_wave_derivatives,
    manufactured_case, pde_residual_fd, petviashvili_initial_guess, petviashvili_solve,
    transfer_wave, validate_forcing,
)


@pytest.mark.parametrize("bc", list(BoundaryKind))
def test_manufactured_forcing_matches_finite_differences(bc):
    assert validate_forcing(manufactured_case(bc, validate=False), n_points=50) < 1e-9


@pytest.mark.parametrize("bc", list(BoundaryKind))
def test_manufactured_fields_respect_boundary_conditions(bc):
    case = manufactured_case(bc)
    a, b = case.interval
    t = 0.7
    if bc is BoundaryKind.REFLECTIVE:
        assert abs(case.u(a, t)) < 1e-14 and abs(case.u(b, t)) < 1e-14
        assert abs(case.eta_x(a, t)) < 1e-12 and abs(case.eta_x(b, t)) < 1e-12
    else:
        assert case.eta(a, t) == pytest.approx(case.eta(b, t))
        assert case.u(a, t) == pytest.approx(case.u(b, t))


def test_wrong_forcing_is_detected():
    case = manufactured_case(BoundaryKind.PERIODIC)
    from dataclasses import replace

    bad = replace(case, forcing_eta=lambda x, t, m=np: case.forcing_eta(x, t, m) + 1e-3)
    with pytest.raises(ConfigurationError):
        validate_forcing(bad, n_points=5)
    r_eta, r_u = pde_residual_fd(case, 0.3, 0.2)
    assert r_eta == pytest.approx(case.forcing_eta(0.3, 0.2), abs=1e-9)
    assert r_u == pytest.approx(case.forcing_u(0.3, 0.2), abs=1e-9)


@given(x=st.floats(-30, 30), t=st.floats(0, 5))
def test_exact_travelling_wave_derivatives(x, t):
    h = 1e-6
    e1, u1 = exact_travelling_wave(x + h, t)
    e0, u0 = exact_travelling_wave(x - h, t)
    ex, ux = exact_travelling_wave_derivatives(x, t)
    assert ex == pytest.approx((e1 - e0) / (2 * h), abs=1e-6)
    assert ux == pytest.approx((u1 - u0) / (2 * h), abs=1e-6)


def test_exact_wave_translates_at_its_speed():
    x = np.linspace(-5, 5, 11)
    e0, _ = exact_travelling_wave(x, 0.0)
    e1, _ = exact_travelling_wave(x + EXACT_WAVE_SPEED * 2.0, 2.0)
    np.testing.assert_allclose(e0, e1, atol=1e-14)


def test_initial_guess_requires_supercritical_speed():
    with pytest.raises(ConfigurationError):
        petviashvili_initial_guess(0.9)


@pytest.fixture(scope="module")
def wave():
    return petviashvili_solve(-20, 20, 200, 3, math.sqrt(1.6))


def test_petviashvili_converges(wave):
    assert wave.residual_history[-1] < 1e-10
    assert wave.iterations < 200
    assert wave.amplitude == pytest.approx(0.58198754, rel=1e-6)


def test_petviashvili_wave_is_symmetric(wave):
    x = np.linspace(0, 10, 21)
    np.testing.assert_allclose(wave.eta(x), wave.eta(-x), atol=1e-9)
    np.testing.assert_allclose(wave.u(x), wave.u(-x), atol=1e-9)


@given(c=st.floats(1.1, 1.8))
def test_amplitude_grows_with_speed(c):
    lo = petviashvili_solve(-30, 30, 200, 2, c).amplitude
    hi = petviashvili_solve(-30, 30, 200, 2, c + 0.1).amplitude
    assert 0 < lo < hi


def test_petviashvili_iteration_limit():
    with pytest.raises(PetviashviliError) as info:
        petviashvili_solve(-20, 20, 100, 1, 1.5, max_iter=2)
    assert len(info.value.residual_history) == 3


@pytest.mark.parametrize("method", ["project", "interpolate"])
@pytest.mark.parametrize("r", [1, 2])
def test_transfer_wave(wave, method, r):
    moved = transfer_wave(wave, r, method)
    assert moved.eta.space.degree == r
    x = np.linspace(-5, 5, 13)
    assert np.abs(moved.eta(x) - wave.eta(x)).max() < 0.01
    assert np.abs(moved.eta_x(x) - wave.eta_x(x)).max() < 0.02
    with pytest.raises(ConfigurationError):
        transfer_wave(wave, r, "nearest")


@pytest.fixture(scope="module")
def wide_wave():
    return petviashvili_solve(-40, 40, 800, 3, 1.6)


def test_petviashvili_residual_trend(wide_wave):
    logs = np.log10(wide_wave.residual_history)
    assert wide_wave.iterations <= 60
    for k in range(3, len(logs) - 5):
        assert logs[k + 5] < logs[k], f"residual grew over iterations {k}..{k + 5}"


def test_converged_wave_satisfies_the_weak_equations(wide_wave):
    from bbmfem.waves import _PetviashviliOperator

    w = wide_wave
    op = _PetviashviliOperator(w.eta.space, w.u.space, w.c_s)
    v = np.concatenate([w.eta.values, w.u.values])
    assert np.abs(op.matrix @ v - op.nonlinear_load(v)).max() <= 10 * 1e-10
