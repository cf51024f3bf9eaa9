import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chemoblow.config import base_initial_data, preset
from chemoblow.dynamics import Params
from chemoblow.energy import energy_G
from chemoblow.grid import build_grid, integrate_ball, norm_W12
from chemoblow.initial_data import (
    MASS_RTOL,
    DriveFailure,
    ResolutionExhausted,
    UnresolvedBump,
    check_membership,
    drive_to_class,
    make_bump,
    max_lp_exponent,
    perturbation_distance,
    smallest_sigma,
    validate_p,
)


@pytest.fixture(scope="module")
def member():
    """Driven supercritical data: a certified member of the blow-up class."""
    cfg = preset("supercritical3d")
    g = cfg.build_grid()
    s = base_initial_data(cfg, g)
    th = cfg.thresholds
    res = drive_to_class(s.u, s.v, s.w, cfg.params, g, th.m, th.A, th.K, th.eps, p_exp=th.p)
    return cfg, g, s, res


def test_bump_mass_and_floor():
    g = build_grid(1.0, 3, 128)
    u = make_bump(5.0, 0.1, g)
    assert integrate_ball(u, g) == pytest.approx(5.0, rel=1e-14)
    assert np.all(u > 0) and u[0] > 1e3 * u[-1]


def test_unresolved_bump():
    g = build_grid(1.0, 3, 64)
    with pytest.raises(UnresolvedBump):
        make_bump(1.0, 0.99 * smallest_sigma(g), g)
    make_bump(1.0, smallest_sigma(g), g)
    with pytest.raises(ValueError):
        make_bump(1.0, 0.0, g)


def test_lp_exponent_range():
    assert max_lp_exponent(3) == pytest.approx(1.2)
    assert max_lp_exponent(2) == pytest.approx(1.0)
    validate_p(1.1, 3)
    for bad in (1.0, 1.2, 2.0):
        with pytest.raises(ValueError):
            validate_p(bad, 3)


def test_drive_certifies_member(member):
    cfg, g, s, res = member
    th = cfg.thresholds
    assert res.report.satisfies
    assert res.distance < th.eps
    assert res.distance == pytest.approx(perturbation_distance(s.u, s.v, s.w, res.u0, res.v0, res.w0, g, th.p))
    assert integrate_ball(res.u0, g) == pytest.approx(th.m, rel=MASS_RTOL)
    assert res.report.g_value <= -th.K and res.report.a_norm <= th.A


def test_drive_returns_members_unchanged(member):
    cfg, g, _, res = member
    th = cfg.thresholds
    again = drive_to_class(res.u0, res.v0, res.w0, cfg.params, g, th.m, th.A, th.K, 0.0, p_exp=th.p)
    assert again.distance == 0.0 and again.sigma is None
    assert np.array_equal(again.u0, res.u0)


def test_drive_failures():
    g = build_grid(1.0, 3, 64)
    p = Params()
    u = np.full(g.N, 1.0)
    v = np.full(g.N, 1.0)
    with pytest.raises(DriveFailure):
        drive_to_class(u, v, v, p, g, 4.0, 10.0, 1.0, 0.0)
    with pytest.raises(ResolutionExhausted) as info:
        drive_to_class(u, v, v, p, g, 4.0, 10.0, 1e6, 50.0)
    assert info.value.best_sigma is not None
    with pytest.raises(ValueError):
        drive_to_class(u, v, v, Params(chi=1.0, xi=1.0), g, 4.0, 10.0, 1.0, 1.0)


# each criterion of the class toggled on its own


def _report(cfg, g, u, v, w, **over):
    th = {"m": cfg.thresholds.m, "A": cfg.thresholds.A, "K": cfg.thresholds.K, **over}
    return check_membership(u, v, w, cfg.params, g, th["m"], th["A"], th["K"])


def test_membership_mass_toggle(member):
    cfg, g, _, res = member
    rep = _report(cfg, g, res.u0 * (1 + 10 * MASS_RTOL), res.v0, res.w0)
    assert rep.positivity_u and rep.positivity_z and rep.a_norm <= rep.A and rep.g_value <= -rep.K
    assert not rep.mass_ok and not rep.satisfies


def test_membership_A_toggle(member):
    cfg, g, _, res = member
    rep = _report(cfg, g, res.u0, res.v0, res.w0, A=res.report.a_norm * (1 - 1e-9))
    assert rep.mass_ok and not rep.satisfies


def test_membership_K_toggle(member):
    cfg, g, _, res = member
    rep = _report(cfg, g, res.u0, res.v0, res.w0, K=-res.report.g_value + 1e-9)
    assert rep.mass_ok and rep.a_norm <= rep.A and not rep.satisfies


def test_membership_positivity_u_toggle(member):
    cfg, g, _, res = member
    u = res.u0.copy()
    # move the outermost cell's mass inward so only positivity changes
    u[-2] += u[-1] * g.vol_weights[-1] / g.vol_weights[-2]
    u[-1] = 0.0
    rep = _report(cfg, g, u, res.v0, res.w0)
    assert rep.mass_ok and rep.a_norm <= rep.A and rep.g_value <= -rep.K
    assert not rep.positivity_u and not rep.satisfies


def test_membership_positivity_z_toggle(member):
    cfg, g, _, res = member
    p = cfg.params
    w = res.w0.copy()
    w[-1] = p.chi * res.v0[-1] / p.xi
    # the kink raises the norm and energy; re-centre A and K on the new data
    probe = _report(cfg, g, res.u0, res.v0, w, A=np.inf, K=-np.inf)
    rep = _report(cfg, g, res.u0, res.v0, w, A=probe.a_norm, K=-probe.g_value)
    assert rep.mass_ok and rep.a_norm <= rep.A and rep.g_value <= -rep.K and rep.positivity_u
    assert not rep.positivity_z and not rep.satisfies


def test_membership_nonpositive_mass_target(member):
    cfg, g, _, res = member
    assert not _report(cfg, g, res.u0, res.v0, res.w0, m=0.0).satisfies


@given(st.floats(0.5, 2.0), st.floats(0.5, 2.0), st.floats(-2.0, 2.0), st.integers(0, 2**31 - 1))
def test_membership_is_conjunction(mass_scale, a_scale, k_shift, seed):
    g = build_grid(1.0, 3, 32)
    p = Params()
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.1, 2.0, g.N)
    v = rng.uniform(0.5, 1.0, g.N)
    w = rng.uniform(0.0, 1.5, g.N)
    m = integrate_ball(u, g) * mass_scale
    z = p.chi * v - p.xi * w
    A = norm_W12(z, g) * a_scale
    G = energy_G(u, v, w, p, g)
    K = -G + k_shift
    rep = check_membership(u, v, w, p, g, m, A, K)
    expected = (
        abs(integrate_ball(u, g) - m) <= MASS_RTOL * m
        and norm_W12(z, g) <= A
        and G <= -K
        and bool(np.all(z > 0))
    )
    assert rep.satisfies == expected
