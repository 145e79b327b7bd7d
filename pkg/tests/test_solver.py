import math

import numpy as np
import pytest

from epdlab.exponents import ModelParams
from epdlab.solver import (GridSpec, InitialProfile, default_bump, energy,
                           first_step, picard_solve, solve, step)

from oracles import exact_wave_mu0, exact_wave_mu2


def march_to(profile, params, grid, t_end, nonlinear=True):
    field = first_step(profile, params, grid, nonlinear)
    while field.t < t_end - 0.5 * field.dt:
        field = step(field, params, grid, nonlinear)
    return field


def linear_sup_error(mu: float, dr: float, t_end: float, oracle) -> float:
    params = ModelParams(n=3, mu=mu, alpha=0.0, p=2.0)
    grid = GridSpec(r_max=4.0, dr=dr, cfl=0.5, t_budget=t_end + 0.5)
    profile = InitialProfile(amplitude=1.0)
    field = march_to(profile, params, grid, t_end, nonlinear=False)
    r = grid.radii()
    sub = slice(0, r.size, max(1, r.size // 200))
    exact = oracle(field.t, r[sub], default_bump)
    return float(np.max(np.abs(field.values[sub] - exact)))


# ---------------------------------------------------------------------------
# exact linear oracles

def test_matches_exact_undamped_wave_at_second_order():
    errs = [linear_sup_error(0.0, dr, 2.0, exact_wave_mu0)
            for dr in (1e-2, 5e-3, 2.5e-3)]
    order = math.log2(errs[0] / errs[2]) / 2.0
    assert 1.7 <= order <= 2.3, (errs, order)
    assert errs[2] < 1e-4


def test_matches_exact_mu_two_wave_at_second_order():
    errs = [linear_sup_error(2.0, dr, 2.0, exact_wave_mu2)
            for dr in (1e-2, 5e-3, 2.5e-3)]
    order = math.log2(errs[0] / errs[2]) / 2.0
    assert 1.7 <= order <= 2.3, (errs, order)
    assert errs[2] < 1e-4


# ---------------------------------------------------------------------------
# energy bookkeeping

def run_trace(mu=1.0, eps=1.0, dr=0.02, t_budget=6.0, nonlinear=True,
              **grid_kw):
    params = ModelParams(n=3, mu=mu, alpha=0.0, p=2.0, epsilon=eps)
    grid = GridSpec(r_max=t_budget + 1.1, dr=dr, cfl=0.5,
                    t_budget=t_budget, **grid_kw)
    return solve(InitialProfile(amplitude=eps), params, grid,
                 record_every=10), grid


def test_linear_energy_plus_dissipation_conserved():
    trace, _ = run_trace(mu=1.5, nonlinear=True, eps=1e-8)
    # amplitude this small makes the forcing negligible: linear regime
    total = np.array(trace.energy) + np.array(trace.damping_dissipation)
    drift = np.max(np.abs(total - total[0])) / total[0]
    assert drift < 1e-9, drift


def test_energy_nonincreasing_with_damping():
    trace, _ = run_trace(mu=1.5, eps=1e-8)
    e = np.array(trace.energy)
    assert np.all(np.diff(e) <= 1e-12 * e[0])


def test_dissipation_nonnegative_and_nondecreasing():
    trace, _ = run_trace(mu=1.0, eps=0.5)
    d = np.array(trace.damping_dissipation)
    assert d[0] == 0.0
    assert np.all(np.diff(d) >= 0.0)


def test_undamped_energy_conserved_without_dissipation():
    trace, _ = run_trace(mu=0.0, eps=1e-8)
    assert np.all(np.array(trace.damping_dissipation) == 0.0)
    e = np.array(trace.energy)
    assert np.max(np.abs(e - e[0])) / e[0] < 1e-9


def test_small_data_forcing_perturbs_energy_mildly():
    lin, _ = run_trace(mu=1.0, eps=0.01)
    total = np.array(lin.energy) + np.array(lin.damping_dissipation)
    rel = np.max(np.abs(total - total[0])) / total[0]
    assert rel < 0.05, rel


# ---------------------------------------------------------------------------
# support and survival

def test_finite_speed_of_propagation():
    trace, grid = run_trace(mu=1.0, eps=0.5)
    for t, rad in zip(trace.times, trace.support_radius):
        assert rad <= t + 1.0 + 2.0 * grid.dr, (t, rad)


def test_moderate_amplitude_run_survives_budget():
    trace, _ = run_trace(mu=1.0, eps=1.0)
    assert trace.verdict == "survived"
    assert not trace.blew_up()
    assert math.isnan(trace.T_num)
    assert all(math.isfinite(s) for s in trace.sup_norm)


def test_origin_stays_smooth():
    trace, grid = run_trace(mu=1.0, eps=1.0, t_budget=3.0)
    field = march_to(InitialProfile(amplitude=1.0),
                     ModelParams(n=3, mu=1.0, p=2.0), grid, 1.5)
    # even reflection symmetry: the first radial difference is O(dr^2)
    u = field.values
    assert abs(u[1] - u[0]) < 5.0 * grid.dr ** 2 * max(1.0, abs(u[0]))


# ---------------------------------------------------------------------------
# blow-up detection

def blowup_trace(eps, dr=0.02, threshold=1e6):
    params = ModelParams(n=3, mu=1.0, alpha=0.0, p=2.0, epsilon=eps)
    grid = GridSpec(r_max=9.2, dr=dr, cfl=0.5, t_budget=8.0,
                    blowup_threshold=threshold)
    return solve(InitialProfile(amplitude=eps), params, grid)


def test_large_amplitude_blows_up_and_is_refined():
    trace = blowup_trace(16.0)
    assert trace.blew_up()
    assert 0.0 < trace.T_num < 8.0
    assert math.isfinite(trace.refine_gap) and trace.refine_gap < 0.01


def test_blowup_time_decreases_with_amplitude():
    t_small = blowup_trace(10.0).T_num
    t_large = blowup_trace(16.0).T_num
    assert t_large < t_small


def test_blowup_time_insensitive_to_threshold():
    t_a = blowup_trace(16.0, threshold=1e5).T_num
    t_b = blowup_trace(16.0, threshold=1e6).T_num
    assert abs(t_a - t_b) / t_b < 0.02


def test_blowup_time_stable_under_grid_halving():
    t_coarse = blowup_trace(16.0, dr=0.02).T_num
    t_fine = blowup_trace(16.0, dr=0.01).T_num
    assert abs(t_coarse - t_fine) / t_fine < 0.02


# ---------------------------------------------------------------------------
# Picard iteration

def test_picard_gaps_contract_geometrically():
    params = ModelParams(n=3, mu=1.0, alpha=0.0, p=2.0, epsilon=0.5)
    grid = GridSpec(r_max=2.0, dr=1.0 / 200.0, cfl=0.5, t_budget=0.5)
    trace, gaps = picard_solve(InitialProfile(amplitude=0.5), params, grid,
                               t_small=0.25)
    assert len(gaps) >= 3
    ratios = [b / a for a, b in zip(gaps, gaps[1:]) if a > 0.0]
    assert all(rt < 0.1 for rt in ratios), gaps
    assert trace.times[-1] == pytest.approx(0.25, abs=2.0 * grid.dt)


def test_picard_limit_matches_direct_march():
    params = ModelParams(n=3, mu=1.0, alpha=0.0, p=2.0, epsilon=0.5)
    grid = GridSpec(r_max=2.0, dr=1.0 / 200.0, cfl=0.5, t_budget=0.5)
    profile = InitialProfile(amplitude=0.5)
    trace, _ = picard_solve(profile, params, grid, t_small=0.25)
    direct = march_to(profile, params, grid, trace.times[-1])
    gap = float(np.max(np.abs(trace.snapshots[-1] - direct.values)))
    # both are second-order in the same dt; they may differ by scheme error
    assert gap < 5.0 * grid.dt ** 2


def test_picard_tiny_amplitude_converges_immediately():
    params = ModelParams(n=3, mu=1.0, alpha=0.0, p=2.0, epsilon=1e-6)
    grid = GridSpec(r_max=2.0, dr=0.01, cfl=0.5, t_budget=0.5)
    _, gaps = picard_solve(InitialProfile(amplitude=1e-6), params, grid,
                           t_small=0.25)
    assert gaps[-1] < 1e-10
    assert len(gaps) <= 3


# ---------------------------------------------------------------------------
# validation

def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(dr=-0.1)
    with pytest.raises(ValueError):
        GridSpec(cfl=1.5)
    with pytest.raises(ValueError):
        GridSpec(r_max=10.0, t_budget=50.0)


def test_profile_validation():
    with pytest.raises(ValueError):
        InitialProfile(amplitude=0.0)
    with pytest.raises(ValueError):
        InitialProfile(amplitude=1.0, shape=lambda r: np.exp(-np.asarray(r)))
    with pytest.raises(ValueError):
        InitialProfile(amplitude=1.0,
                       shape=lambda r: -default_bump(r))


def test_first_step_respects_boundary_and_symmetry():
    params = ModelParams(n=3, mu=1.0, p=2.0)
    grid = GridSpec(r_max=2.0, dr=0.01, cfl=0.5, t_budget=0.5)
    field = first_step(InitialProfile(amplitude=1.0), params, grid)
    assert field.values[-1] == 0.0
    assert field.t == pytest.approx(grid.dt)
    # u_t(0) = 0: the first step moves the profile only at O(dt^2)
    assert np.max(np.abs(field.values - field.prev_values)) < 10.0 * grid.dt ** 2
