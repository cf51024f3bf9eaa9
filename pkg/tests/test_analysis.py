from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from chemoblow.analysis import (
    FitFailure,
    Verdict,
    blowup_time_bound,
    classify,
    fit_c2,
    ode_lower_bound,
    reduction_equivalence,
    refinement_study,
    run_lockstep,
    theta_of,
)
from chemoblow.dynamics import FullState, Params, StepControl, Termination, Trajectory, integrate
from chemoblow.energy import EnergyRecord
from chemoblow.grid import build_grid

from conftest import smooth_positive


def test_theta_values():
    assert theta_of(3) == float(Fraction(5, 7))
    assert theta_of(2) == pytest.approx(2 / 3)


def test_escape_time_closed_form():
    assert blowup_time_bound(1.0, 1.0, 5 / 7) == pytest.approx(2.5, rel=1e-15)


def test_escape_time_against_ode_integration():
    # integrate y' = y^{7/5} from y = 1 until y explodes
    hit = lambda t, y: y[0] - 1e12
    hit.terminal = True
    sol = solve_ivp(lambda t, y: y ** 1.4, (0, 10), [1.0], events=hit, rtol=1e-12, atol=1e-12)
    assert sol.t_events[0][0] == pytest.approx(2.5, rel=1e-3)


@given(st.floats(0.1, 10.0), st.floats(0.05, 5.0), st.sampled_from([2, 3, 4, 5]), st.floats(0.05, 0.9))
def test_bound_solves_ode(y0, c2, n, frac):
    theta = theta_of(n)
    T = blowup_time_bound(y0, c2, theta)
    t = frac * T
    h = 1e-6 * T
    y = ode_lower_bound(y0, c2, theta, t)
    dydt = (ode_lower_bound(y0, c2, theta, t + h) - ode_lower_bound(y0, c2, theta, t - h)) / (2 * h)
    assert dydt == pytest.approx(c2 * y ** (1 / theta), rel=1e-6)
    assert ode_lower_bound(y0, c2, theta, 0.0) == pytest.approx(y0, rel=1e-15)


def test_bound_past_escape():
    theta = 5 / 7
    with pytest.raises(ValueError):
        ode_lower_bound(1.0, 1.0, theta, 2.5)
    out = ode_lower_bound(1.0, 1.0, theta, np.array([0.0, 1.0, 3.0]), strict=False)
    assert np.isinf(out[2]) and out[0] == 1.0
    with pytest.raises(ValueError):
        blowup_time_bound(-1.0, 1.0, theta)


def synthetic_ledger(c2, theta=5 / 7, y0=1.0, dt=1e-3, frac=0.9, F_shift=0.0):
    T = blowup_time_bound(y0, c2, theta)
    t = np.arange(0.0, frac * T, dt)
    y = ode_lower_bound(y0, c2, theta, t)
    return [
        EnergyRecord(float(tk), float(-yk + F_shift), 0.0, 1.0, 1.0, 0.0 if k == 0 else dt)
        for k, (tk, yk) in enumerate(zip(t, y))
    ]


def test_fit_recovers_synthetic_c2():
    assert fit_c2(synthetic_ledger(0.3), 5 / 7) == pytest.approx(0.3, rel=0.02)


def test_fit_skips_nonnegative_prefix():
    led = [EnergyRecord(0.0, 5.0, 0.0, 1.0, 1.0, 0.0)] + synthetic_ledger(0.3)[1:]
    assert fit_c2(led, 5 / 7) == pytest.approx(0.3, rel=0.02)


def test_fit_failures():
    flat = [EnergyRecord(0.001 * k, -2.0, 0.0, 1.0, 1.0, 0.001) for k in range(50)]
    with pytest.raises(FitFailure):
        fit_c2(flat, 5 / 7)
    positive = [EnergyRecord(0.001 * k, 2.0 - k, 0.0, 1.0, 1.0, 0.001) for k in range(2)]
    with pytest.raises(FitFailure):
        fit_c2(positive, 5 / 7)


def _traj(u_max, dts, reason, t_end=1.0):
    times = np.r_[0.0, np.cumsum(dts)].tolist()
    z = np.zeros(8)
    s = FullState(z, z, z)
    return Trajectory(times, list(dts), list(u_max), [1.0] * len(u_max), s, s, reason, t_end)


def test_classify_verdicts():
    ctl = StepControl(t_end=1.0)
    blew = _traj([1.0, 10.0, 200.0], [1e-2, 1e-5], Termination.DT_COLLAPSE)
    assert classify(blew, None, ctl, 3).verdict is Verdict.BLEW_UP
    weak = _traj([1.0, 10.0, 50.0], [1e-2, 1e-5], Termination.DT_COLLAPSE)
    assert classify(weak, None, ctl, 3).verdict is Verdict.INCONCLUSIVE
    done = _traj([1.0, 1.0, 1.0], [0.5, 0.5], Termination.COMPLETED)
    rep = classify(done, None, ctl, 3)
    assert rep.verdict is Verdict.COMPLETED and rep.theta == pytest.approx(5 / 7)
    assert classify(_traj([1.0, 1.0], [0.5], Termination.MAX_STEPS), None, ctl, 3).verdict is Verdict.INCONCLUSIVE


def test_classify_attaches_escape_time():
    led = synthetic_ledger(0.3)
    traj = _traj([1.0] * len(led), [r.dt for r in led[1:]], Termination.DT_COLLAPSE)
    rep = classify(traj, led, StepControl(t_end=10.0), 3)
    assert rep.c2_fit == pytest.approx(0.3, rel=0.02)
    assert rep.T_star_estimate == pytest.approx(blowup_time_bound(1.0, rep.c2_fit, 5 / 7))
    assert set(rep.to_dict()) >= {"verdict", "c2_fit", "T_star_estimate"}
    assert "u_max_history" in rep.to_dict(histories=True)


def _smooth_start(g, p):
    u0 = smooth_positive(g, seed=11, level=2.0, amp=0.4)
    return FullState(u0, 0.5 + 0.2 * u0, 1.0 - 0.2 * u0)


def test_lockstep_is_exact_with_combined_upwinding():
    g = build_grid(1.0, 3, 64)
    p = Params()
    series = run_lockstep(_smooth_start(g, p), p, g, 1e-3, 0.02)
    assert series.max_e_z <= 1e-12 and series.max_e_u <= 1e-12


def test_split_upwinding_leaves_spatial_gap():
    # per-component upwinding differs from the reduced scheme by O(h), not O(dt)
    g = build_grid(1.0, 3, 64)
    p = Params()
    s0 = _smooth_start(g, p)
    study = refinement_study(s0, p, g, [1e-3, 5e-4], 0.02, split_upwind=True)
    assert not study.exact
    assert max(r.max_e_u for r in study.rows) > 1e-8


def test_refinement_study_passes():
    g = build_grid(1.0, 3, 64)
    p = Params()
    study = refinement_study(_smooth_start(g, p), p, g, [1e-3, 5e-4, 2.5e-4], 0.02)
    assert study.exact and study.passed


def test_equivalence_input_checks():
    g = build_grid(1.0, 3, 32)
    p = Params()
    s0 = _smooth_start(g, p)
    a = integrate(s0, p, g, StepControl.fixed(1e-3, 0.005), keep_states=True)
    b = integrate(s0.reduce(p), p, g, StepControl.fixed(5e-4, 0.005), keep_states=True)
    with pytest.raises(ValueError):
        reduction_equivalence(a, b, p)
    c = integrate(s0.reduce(p), p, g, StepControl.fixed(1e-3, 0.005))
    with pytest.raises(ValueError):
        reduction_equivalence(a, c, p)
    with pytest.raises(ValueError):
        run_lockstep(s0, Params(delta=2.0), g, 1e-3, 0.005)
