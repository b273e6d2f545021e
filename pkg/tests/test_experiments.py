import math

import pytest

from bbmfem.experiments import (
    PropagationResult, cells_for, run_collision, run_convergence_study, run_exact_wave_study,
    run_reflection, run_solitary_propagation,
)
from bbmfem.mesh import ConfigurationError


def test_cells_for():
    assert cells_for(-20, 20, 0.1) == 400
    with pytest.raises(ConfigurationError):
        cells_for(0, 1, 0.3)


@pytest.mark.parametrize("bc", ["periodic", "reflective"])
def test_small_convergence_study_converges(bc):
    report = run_convergence_study(bc, r=2, dx_list=(0.1, 0.05), T=0.2, jobs=2)
    assert len(report.rows) == 2
    # even degrees converge at rate r, odd degrees at r + 1
    assert 1.7 < report.terminal_rate("E0_H") < 2.5
    assert not math.isnan(report.rows[0].tE1_H)


def test_standard_scheme_study_has_no_tilde_errors():
    report = run_convergence_study("periodic", "standard", r=1, dx_list=(0.1, 0.05), T=0.2)
    assert math.isnan(report.rows[0].tE1_H)
    assert 1.7 < report.terminal_rate("E0_H") < 2.3


def test_exact_wave_study_small():
    report = run_exact_wave_study(r=3, dx_list=(0.4, 0.2), T=1.0)
    assert report.terminal_rate("E0_H") > 3.5


def test_solitary_propagation_short_run():
    res = run_solitary_propagation(dx=0.2, dt=0.2, T=4.0, snapshot_times=(0.0, 4.0))
    assert isinstance(res, PropagationResult)
    assert res.drift.max_expected() < 1e-13
    assert len(res.tracks) == len(res.series.times)
    assert res.tracks[-1].E_phase < 0.1
    assert [s.t for s in res.snapshots] == pytest.approx([0.0, 4.0], abs=0.2)
    assert res.series.gamma_stats()["max_abs_gamma_minus_1"] < 1e-3
    assert res.mean_track(1.0, 4.0)["E_amp"] < 1e-2
    with pytest.raises(ValueError):
        res.mean_track(50, 60)


def test_standard_scheme_runs_without_relaxation():
    res = run_solitary_propagation(dx=0.2, dt=0.2, T=2.0, scheme="standard", track=False)
    assert res.series.gamma_stats()["max_abs_gamma_minus_1"] == 0.0
    assert res.drift.E_mass < 1e-13


def test_collision_and_reflection_short_runs():
    col = run_collision(T=2.0, dx=0.2, dt=0.2)
    assert col.drift.max_expected() < 1e-12
    ref = run_reflection(T=2.0, dx=0.2, dt=0.2, snapshot_times=(0.0, 2.0))
    assert ref.drift.max_expected() < 1e-12
    assert len(ref.snapshots) == 2


@pytest.mark.slow
def test_full_collision_mass_drift():
    res = run_collision(T=600.0, stride=10)
    assert res.drift.E_mass <= 1e-12
    assert res.drift.E_energy <= 1e-12 * max(1.0, res.series.invariants[0].energy)
