import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chemoblow.dynamics import (
    FullState,
    Params,
    ReducedState,
    StepControl,
    Termination,
    _chemical_potential_after,
    constant_steady_state,
    integrate,
    step,
)
from chemoblow.grid import build_grid, integrate_ball
from chemoblow.operators import advective_step_limit, implicit_helmholtz_solve

from conftest import smooth_positive


def test_params_validation():
    with pytest.raises(ValueError):
        Params(chi=-1.0)
    with pytest.raises(ValueError):
        Params(beta=0.0)
    p = Params(chi=2.0, xi=1.0, alpha=3.0, gamma=0.5, beta=2.0, delta=2.0)
    assert p.reducible and p.sensitivity == pytest.approx(5.5)
    with pytest.raises(ValueError):
        Params(beta=1.0, delta=2.0).require_reducible()


@pytest.mark.parametrize(
    "kw", [dict(dt_min=0.0), dict(dt_init=1.0, dt_max=0.1), dict(cfl=0.0), dict(cfl=1.5), dict(t_end=0.0)]
)
def test_step_control_validation(kw):
    with pytest.raises(ValueError):
        StepControl(**kw)


def test_reduced_state_needs_equal_decay():
    g = build_grid(1.0, 3, 16)
    s = ReducedState(np.ones(16), np.ones(16))
    with pytest.raises(ValueError):
        integrate(s, Params(delta=2.0), g, StepControl(t_end=0.01))


def test_constant_steady_state_is_fixed(params):
    g = build_grid(1.0, 3, 64)
    s0 = constant_steady_state(0.7, params, g)
    traj = integrate(s0, params, g, StepControl(t_end=0.5))
    assert traj.reason is Termination.COMPLETED
    assert traj.t_last == 0.5
    for a, b in zip((traj.final.u, traj.final.v, traj.final.w), (s0.u, s0.v, s0.w)):
        assert np.max(np.abs(a - b)) <= 1e-13


def test_mass_conserved_adaptive(params):
    g = build_grid(1.0, 3, 128)
    u0 = smooth_positive(g, seed=3, level=2.0, amp=0.4)
    s0 = FullState(u0, 0.5 * u0, 0.5 * u0)
    traj = integrate(s0, params, g, StepControl(t_end=0.2))
    assert traj.reason is Termination.COMPLETED
    m = np.array(traj.mass)
    assert np.max(np.abs(m - m[0])) <= 1e-13 * m[0]
    assert np.all(traj.final.u > 0)


def test_balanced_sensitivities_give_heat_step():
    # chi = xi with alpha = gamma and v0 = w0: the potential vanishes identically
    g = build_grid(1.0, 3, 64)
    p = Params(chi=1.5, xi=1.5)
    u0 = smooth_positive(g, seed=1)
    s = step(FullState(u0, 0.3 * u0, 0.3 * u0), p, g, 1e-3)
    assert np.array_equal(s.v, s.w)
    assert np.allclose(s.u, implicit_helmholtz_solve(u0, g, 1e-3, 0.0), rtol=0, atol=1e-14)


def test_constant_density_from_zero_chemicals():
    # closed form of one implicit step: z = dt (chi - xi) c / (1 + dt)
    g = build_grid(1.0, 3, 32)
    p = Params(chi=2.0, xi=1.0)
    c, dt = 1.3, 0.01
    s = step(FullState(np.full(32, c), np.zeros(32), np.zeros(32)), p, g, dt)
    assert np.allclose(s.potential(p), dt * (p.chi - p.xi) * c / (1 + dt), rtol=1e-13)
    assert np.allclose(s.u, c, rtol=1e-14)
    r = step(ReducedState(np.full(32, c), np.zeros(32)), p, g, dt)
    assert np.allclose(r.z, dt * (p.chi - p.xi) * c / (1 + dt), rtol=1e-13)


def test_zero_density_only_decays(params):
    g = build_grid(1.0, 3, 32)
    s = step(FullState(np.zeros(32), np.full(32, 2.0), np.full(32, 1.0)), params, g, 0.1)
    assert np.all(s.u == 0.0)
    assert np.allclose(s.v, 2.0 / 1.1, rtol=1e-14)
    assert np.allclose(s.w, 1.0 / 1.1, rtol=1e-14)


def test_pure_heat_flow_decays_to_mean():
    g = build_grid(1.0, 3, 64)
    p = Params(chi=0.0, xi=0.0)
    u0 = smooth_positive(g, seed=2, amp=0.8)
    mean = integrate_ball(u0, g) / np.sum(g.vol_weights)
    traj = integrate(FullState(u0, u0 * 0, u0 * 0), p, g, StepControl(t_end=1.0, dt_max=0.05), keep_states=True)
    spread = [np.max(np.abs(s.u - mean)) for s in traj.states]
    assert np.all(np.diff(spread) <= 1e-14)
    assert spread[-1] < 1e-3 * spread[0]


def test_combined_upwind_matches_reduced_step(params):
    g = build_grid(1.0, 3, 64)
    u0 = smooth_positive(g, seed=4)
    # opposite chemical gradients: the two per-component fluxes upwind from different cells
    s0 = FullState(u0, 1.0 + 0.2 * u0, 1.5 - 0.3 * u0)
    full = step(s0, params, g, 1e-3)
    red = step(s0.reduce(params), params, g, 1e-3)
    assert np.max(np.abs(full.potential(params) - red.z)) <= 1e-13
    assert np.max(np.abs(full.u - red.u)) <= 1e-13
    split = step(s0, params, g, 1e-3, split_upwind=True)
    assert np.max(np.abs(split.u - red.u)) > 1e-10


@given(st.integers(0, 2**31 - 1), st.floats(0.05, 1.0))
def test_single_step_positive_and_conservative(seed, frac):
    g = build_grid(1.0, 3, 48)
    p = Params(chi=3.0, xi=1.0)
    rng = np.random.default_rng(seed)
    u0 = rng.uniform(0.01, 5.0, g.N)
    v0 = rng.uniform(0.0, 2.0, g.N)
    w0 = rng.uniform(0.0, 2.0, g.N)
    s0 = FullState(u0, v0, w0)
    # the ceiling depends on the potential the step itself produces; iterate to a fixed point
    dt = 1e-3
    for _ in range(50):
        limit = frac * advective_step_limit(_chemical_potential_after(s0, p, g, dt), g)
        if dt <= limit:
            break
        dt = 0.9 * limit
    s1 = step(s0, p, g, dt)
    assert np.all(s1.u >= 0.0)
    assert integrate_ball(s1.u, g) == pytest.approx(integrate_ball(u0, g), rel=1e-13)


def test_sup_norm_cap_terminates(params):
    g = build_grid(1.0, 3, 64)
    u0 = 40 * np.exp(-((g.r / 0.1) ** 2)) + 0.1
    traj = integrate(FullState(u0, 5 * u0, u0), params, g, StepControl(t_end=1.0, u_max_cap=1.2 * u0.max()))
    assert traj.reason is Termination.SUP_NORM_CAP
    assert traj.u_max[-1] >= 1.2 * u0.max()


def test_max_steps_and_dt_collapse(params):
    g = build_grid(1.0, 3, 32)
    s0 = constant_steady_state(1.0, params, g)
    traj = integrate(s0, params, g, StepControl(t_end=1.0, max_steps=3))
    assert traj.reason is Termination.MAX_STEPS and traj.steps == 3
    u0 = 400 * np.exp(-((g.r / 0.15) ** 2)) + 0.1
    ctl = StepControl(t_end=1.0, dt_init=1e-3, dt_min=1e-3, dt_max=1e-3)
    traj = integrate(FullState(u0, 10 * u0, 0 * u0), params, g, ctl)
    assert traj.reason is Termination.DT_COLLAPSE
    assert "dt_min" in traj.message


def test_rejects_negative_initial_density(params):
    g = build_grid(1.0, 3, 16)
    with pytest.raises(ValueError):
        integrate(FullState(-np.ones(16), np.ones(16), np.ones(16)), params, g, StepControl())


def test_observers_see_every_state(params):
    g = build_grid(1.0, 3, 32)
    seen = []
    traj = integrate(constant_steady_state(1.0, params, g), params, g, StepControl(t_end=0.05), [lambda s, dt: seen.append(dt)])
    assert len(seen) == traj.steps + 1
    assert seen[0] == 0.0 and seen[1:] == traj.dts
