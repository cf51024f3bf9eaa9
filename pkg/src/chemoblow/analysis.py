"""Blow-up classification and the superlinear ODE comparison for y = -F.

Along a blowing-up solution y(t) = -F(u, z) satisfies y' >= c2 y^{1/theta}
with theta = (n+2)/(n+4). Its comparison solution

    y0 * (1 - (1-theta)/theta * c2 * y0^{(1-theta)/theta} * t)^{-theta/(1-theta)}

escapes to infinity at T* = theta / ((1-theta) c2 y0^{(1-theta)/theta}).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    FullState,
    Params,
    ReducedState,
    StepControl,
    Termination,
    Trajectory,
    integrate,
)
from .energy import EnergyRecord
from .grid import RadialGrid

GROWTH_FACTOR = 100.0
MIN_FIT_STEPS = 5


class FitFailure(ValueError):
    pass


def theta_of(n: int) -> float:
    return (n + 2.0) / (n + 4.0)


def blowup_time_bound(y0: float, c2: float, theta: float) -> float:
    """Escape time of the comparison solution started from ``y0`` at t = 0."""
    if not (y0 > 0.0 and c2 > 0.0 and 0.0 < theta < 1.0):
        raise ValueError(f"need y0 > 0, c2 > 0, theta in (0, 1); got {y0}, {c2}, {theta}")
    return theta / ((1.0 - theta) * c2 * y0 ** ((1.0 - theta) / theta))


def ode_lower_bound(y0: float, c2: float, theta: float, t, strict: bool = True):
    """Comparison solution of y' = c2 y^{1/theta}; vectorised over ``t``.

    Times at or past the escape time raise ``ValueError`` when ``strict``;
    otherwise they map to ``inf``.
    """
    T = blowup_time_bound(y0, c2, theta)
    t_arr = np.asarray(t, dtype=float)
    past = t_arr >= T
    if strict and np.any(past):
        raise ValueError(f"t >= T* = {T:.6g}: the bound has already escaped")
    k = (1.0 - theta) / theta
    with np.errstate(divide="ignore", invalid="ignore"):
        base = 1.0 - k * c2 * y0**k * t_arr
        out = np.where(past, np.inf, y0 * np.abs(base) ** (-1.0 / k))
    return float(out) if out.ndim == 0 else out


def fit_c2(ledger: list[EnergyRecord], theta: float) -> float:
    """Largest c2 with y_{k+1} - y_k >= dt_k c2 y_k^{1/theta} on every growth step.

    The leading stretch of records with F >= 0 is discarded; afterwards
    only consecutive pairs with 0 < y_k < y_{k+1} count.
    """
    y = np.array([-rec.F for rec in ledger])
    dt = np.array([rec.dt for rec in ledger])
    positive = np.flatnonzero(y > 0.0)
    if positive.size == 0:
        raise FitFailure("energy never becomes negative")
    start = positive[0]
    y, dt = y[start:], dt[start:]
    y_k, y_next, h = y[:-1], y[1:], dt[1:]
    growing = (y_k > 0.0) & (y_next > y_k) & (h > 0.0)
    if np.count_nonzero(growing) < MIN_FIT_STEPS:
        raise FitFailure(f"only {np.count_nonzero(growing)} growth steps, need {MIN_FIT_STEPS}")
    ratios = (y_next[growing] - y_k[growing]) / h[growing] / y_k[growing] ** (1.0 / theta)
    return float(ratios.min())


class Verdict(str, enum.Enum):
    BLEW_UP = "BlewUp"
    COMPLETED = "Completed"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class BlowupReport:
    verdict: Verdict
    t_last: float
    termination: str
    u_max_history: list[float] = field(repr=False)
    dt_history: list[float] = field(repr=False)
    theta: float
    growth: float
    dt_collapse_ratio: float
    c2_fit: float | None = None
    T_star_estimate: float | None = None
    y0: float | None = None

    def to_dict(self, histories: bool = False) -> dict:
        d = {
            "verdict": self.verdict.value,
            "t_last": self.t_last,
            "termination": self.termination,
            "theta": self.theta,
            "growth": self.growth,
            "dt_collapse_ratio": self.dt_collapse_ratio,
            "c2_fit": self.c2_fit,
            "T_star_estimate": self.T_star_estimate,
            "y0": self.y0,
        }
        if histories:
            d["u_max_history"] = list(self.u_max_history)
            d["dt_history"] = list(self.dt_history)
        return d


def classify(
    traj: Trajectory,
    ledger: list[EnergyRecord] | None,
    ctl: StepControl,
    n: int,
) -> BlowupReport:
    """BlewUp needs a blow-up termination and a 100-fold growth of max u."""
    u0, u_last = traj.u_max[0], traj.u_max[-1]
    growth = u_last / u0 if u0 > 0.0 else (np.inf if u_last > 0.0 else 1.0)
    dts = np.asarray(traj.dts)
    collapse = float(dts[-1] / dts.max()) if dts.size else 1.0
    finite = bool(np.isfinite(u_last))

    if traj.reason in (Termination.SUP_NORM_CAP, Termination.DT_COLLAPSE) and u0 > 0.0 and growth >= GROWTH_FACTOR:
        verdict = Verdict.BLEW_UP
    elif traj.reason is Termination.COMPLETED and finite and abs(traj.t_last - ctl.t_end) <= 1e-9 * max(1.0, ctl.t_end):
        verdict = Verdict.COMPLETED
    else:
        verdict = Verdict.INCONCLUSIVE

    theta = theta_of(n)
    report = BlowupReport(
        verdict=verdict,
        t_last=traj.t_last,
        termination=traj.reason.value,
        u_max_history=list(traj.u_max),
        dt_history=list(traj.dts),
        theta=theta,
        growth=float(growth),
        dt_collapse_ratio=collapse,
    )
    if ledger and len(ledger) >= 2 and np.isfinite(ledger[0].F):
        try:
            report.c2_fit = fit_c2(ledger, theta)
        except FitFailure:
            return report
        y0 = -ledger[0].F
        if y0 > 0.0 and report.c2_fit > 0.0:
            report.y0 = y0
            report.T_star_estimate = ledger[0].t + blowup_time_bound(y0, report.c2_fit, theta)
    return report


@dataclass
class ErrorSeries:
    t: np.ndarray
    e_z: np.ndarray
    e_u: np.ndarray

    @property
    def max_e_z(self) -> float:
        return float(self.e_z.max())

    @property
    def max_e_u(self) -> float:
        return float(self.e_u.max())


def reduction_equivalence(full: Trajectory, reduced: Trajectory, p: Params) -> ErrorSeries:
    """Per-step sup-norm gaps between (chi v - xi w, u) and (z, u) of two lockstep runs."""
    if full.states is None or reduced.states is None:
        raise ValueError("both trajectories must be integrated with keep_states=True")
    if len(full.dts) != len(reduced.dts) or not np.array_equal(full.dts, reduced.dts):
        raise ValueError("trajectories do not share the same accepted dt sequence")
    e_z, e_u = [], []
    for fs, rs in zip(full.states, reduced.states):
        assert isinstance(fs, FullState) and isinstance(rs, ReducedState)
        e_z.append(float(np.max(np.abs(fs.potential(p) - rs.z))))
        e_u.append(float(np.max(np.abs(fs.u - rs.u))))
    return ErrorSeries(np.array(full.times), np.array(e_z), np.array(e_u))


def run_lockstep(
    s0: FullState,
    p: Params,
    g: RadialGrid,
    dt: float,
    t_end: float,
    split_upwind: bool = False,
) -> ErrorSeries:
    """Integrate full and reduced systems with one shared constant dt and compare."""
    p.require_reducible()
    ctl = StepControl(t_end=t_end, dt_init=dt, dt_min=dt * 1e-3, dt_max=dt, cfl=1.0)
    full = integrate(s0, p, g, ctl, keep_states=True, split_upwind=split_upwind)
    reduced = integrate(s0.reduce(p), p, g, ctl, keep_states=True)
    if full.dts != reduced.dts:
        raise ValueError("lockstep broke: the CFL ceiling shortened a step in only one run")
    if any(abs(h - dt) > 1e-12 * dt for h in full.dts[:-1]):
        raise ValueError(f"dt={dt:g} exceeds the advective limit; lockstep needs a smaller step")
    return reduction_equivalence(full, reduced, p)


def observed_orders(errors, ratio: float = 2.0) -> np.ndarray:
    e = np.asarray(errors, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(e[:-1] / e[1:]) / np.log(ratio)


@dataclass
class RefinementRow:
    dt: float
    max_e_z: float
    max_e_u: float


@dataclass
class RefinementStudy:
    rows: list[RefinementRow]
    orders: np.ndarray
    roundoff: float
    series: ErrorSeries  # at the coarsest dt

    @property
    def exact(self) -> bool:
        """Gaps sit at round-off level for every dt (discrete reduction is exact)."""
        return all(r.max_e_z <= self.roundoff for r in self.rows)

    @property
    def passed(self) -> bool:
        return self.exact or bool(np.all(self.orders >= 0.9))


def refinement_study(
    s0: FullState,
    p: Params,
    g: RadialGrid,
    dts,
    t_end: float,
    split_upwind: bool = False,
    roundoff_rtol: float = 1e-12,
) -> RefinementStudy:
    rows, first = [], None
    for dt in dts:
        series = run_lockstep(s0, p, g, dt, t_end, split_upwind)
        first = first or series
        rows.append(RefinementRow(float(dt), series.max_e_z, series.max_e_u))
    scale = max(1.0, float(np.max(np.abs(s0.potential(p)))))
    orders = observed_orders([r.max_e_z for r in rows], dts[0] / dts[1] if len(dts) > 1 else 2.0)
    return RefinementStudy(rows, orders, roundoff_rtol * scale, first)
