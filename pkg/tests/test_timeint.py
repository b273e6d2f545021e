import numpy as np
import pytest
from hypothesis import given, strategies as st

from bbmfem.acceptance import rk4_observed_order
from bbmfem.experiments import generate_wave, _state_from_waves, _make_semi
from bbmfem.mesh import ConfigurationError
from bbmfem.semidisc import BoundaryKind, SchemeKind, setup
from bbmfem.timeint import (
    GAMMA_WINDOW, Integrator, RelaxationConfig, RelaxationError, classic_rk4, energy_cubic,
    forward_euler, rk_direction, solve_gamma_from_coefficients,
)


def test_tableaux_are_consistent():
    for tab in (classic_rk4(), forward_euler()):
        assert tab.b.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(tab.A.sum(axis=1), tab.c)


def test_rk4_order():
    assert 3.8 < rk4_observed_order() < 4.2


def test_rk_direction_linear_problem():
    d, slopes = rk_direction(lambda t, y: -y, np.array([1.0]), 0.0, 0.1, classic_rk4())
    assert len(slopes) == 4
    assert 1 + 0.1 * d[0] == pytest.approx(np.exp(-0.1), abs=1e-7)


@given(target=st.floats(0.6, 1.4), a=st.floats(-1, 1), B=st.floats(0.1, 5), dt=st.floats(0.01, 0.5))
def test_secant_finds_the_nontrivial_root(target, a, B, dt):
    # in practice the cubic term is small next to the quadratic one over a step
    A = 0.1 * a * B / dt
    tau = target * dt
    G = -(B * tau + A * tau**2)
    gamma, _ = solve_gamma_from_coefficients((A, B, G), dt, RelaxationConfig())
    assert gamma == pytest.approx(target, abs=1e-8)
    assert abs(energy_cubic((A, B, G), dt)(gamma)) < 1e-12


def test_gamma_outside_window_raises():
    dt, B = 0.1, 1.0
    G = -B * 2.0 * dt  # root at gamma = 2
    with pytest.raises(RelaxationError):
        solve_gamma_from_coefficients((0.0, B, G), dt, RelaxationConfig())
    assert GAMMA_WINDOW == (0.5, 1.5)


def test_relaxation_requires_conservative_unforced_scheme():
    with pytest.raises(ConfigurationError):
        Integrator(setup(0, 1, 4, 1, BoundaryKind.PERIODIC, SchemeKind.STANDARD))


def _wave_state(dx=0.2):
    semi = _make_semi((-20, 20), dx, 1, BoundaryKind.PERIODIC, SchemeKind.CONSERVATIVE)
    wave = generate_wave(np.sqrt(1.6), (-20, 20), dx, BoundaryKind.PERIODIC, 0.0, 1, "project")
    return semi, _state_from_waves(semi, [wave])


def test_relaxed_integration_conserves_energy():
    semi, state = _wave_state()
    integ = Integrator(semi)
    final, recs = integ.integrate(state, 2.0, 0.2)
    e = [r.invariants.energy for r in recs if r.invariants is not None]
    assert max(abs(v - e[0]) for v in e) < 1e-13 * abs(e[0])
    assert final.t >= 2.0 - 1e-9
    assert all(abs(r.gamma - 1) < 1e-3 for r in recs)


def test_plain_rk4_drifts_energy_and_uses_nominal_times():
    semi, state = _wave_state()
    integ = Integrator(semi, relaxation=RelaxationConfig(enabled=False))
    final, recs = integ.integrate(state, 2.0, 0.2, stride=5)
    assert final.t == pytest.approx(2.0)
    e = [r.invariants.energy for r in recs if r.invariants is not None]
    assert len(e) == 3
    assert abs(e[-1] - e[0]) > 1e-12


def test_large_step_fails_loudly():
    semi, state = _wave_state()
    with pytest.raises(RelaxationError):
        Integrator(semi).integrate(state, 30.0, 3.0)


def test_gamma_is_exactly_one_without_relaxation():
    semi, state = _wave_state()
    integ = Integrator(semi, relaxation=RelaxationConfig(enabled=False))
    _, recs = integ.integrate(state, 1.0, 0.2)
    assert all(r.gamma == 1.0 for r in recs)


def test_accepted_gamma_matches_energy_to_root_tolerance():
    from bbmfem.functionals import energy
    from bbmfem.mesh import FemFunction

    semi, state = _wave_state()
    integ = Integrator(semi)
    new, rec = integ.step(state, 0.2)
    f0, f1 = semi.functions(state), semi.functions(new)
    e0, e1 = energy(f0["H"], f0["U"]), energy(f1["H"], f1["U"])
    assert abs(e1 - e0) <= 1e-10 * max(1.0, abs(e0))
    assert rec.t == pytest.approx(0.2 * rec.gamma)
    del FemFunction
