"""IMEX time stepping for the attraction-repulsion system and its reduced form.

Full system, with positive rates alpha, beta, gamma, delta::

    u_t = Lap u - chi div(u grad v) + xi div(u grad w)
    v_t = Lap v - beta v + alpha u
    w_t = Lap w - delta w + gamma u

Reduced system for z = chi v - xi w, valid when beta == delta::

    u_t = Lap u - div(u grad z)
    z_t = Lap z - beta z + (chi alpha - xi gamma) u

Each step solves the chemical equations implicitly with ``u`` lagged, then
transports ``u`` explicitly with upwinding in the freshly computed potential
and finishes with an implicit diffusion solve for ``u``.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .grid import RadialGrid, integrate_ball
from .operators import advective_step_limit, chemo_div, implicit_helmholtz_solve

log = logging.getLogger(__name__)

POSITIVITY_TOL = 1e-12


class StepFailure(RuntimeError):
    """A single time step could not be accepted."""


class PositivityLoss(StepFailure):
    pass


class NonFinite(StepFailure):
    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t


@dataclass(frozen=True)
class Params:
    """Sensitivities and chemical production/decay rates.

    Defaults of one for all four rates recover the classical system with
    ``v_t = Lap v - v + u`` and ``w_t = Lap w - w + u``.
    """

    chi: float = 2.0
    xi: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    delta: float = 1.0

    def __post_init__(self) -> None:
        for name in ("chi", "xi"):
            if not getattr(self, name) >= 0.0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")
        for name in ("alpha", "beta", "gamma", "delta"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def reducible(self) -> bool:
        """Whether z = chi v - xi w obeys a closed equation (equal decay rates)."""
        return self.beta == self.delta

    @property
    def sensitivity(self) -> float:
        """Net production rate of z per unit density, chi alpha - xi gamma."""
        return self.chi * self.alpha - self.xi * self.gamma

    def require_reducible(self) -> None:
        if not self.reducible:
            raise ValueError(
                f"beta={self.beta} != delta={self.delta}: no closed equation for chi v - xi w"
            )


@dataclass(frozen=True)
class FullState:
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    t: float = 0.0

    def potential(self, p: Params) -> np.ndarray:
        return p.chi * self.v - p.xi * self.w

    def reduce(self, p: Params) -> "ReducedState":
        return ReducedState(self.u, self.potential(p), self.t)


@dataclass(frozen=True)
class ReducedState:
    u: np.ndarray
    z: np.ndarray
    t: float = 0.0

    def potential(self, p: Params) -> np.ndarray:
        return self.z


State = Union[FullState, ReducedState]


@dataclass(frozen=True)
class StepControl:
    t_end: float = 1.0
    dt_init: float = 1e-3
    dt_min: float = 1e-9
    dt_max: float = 1e-2
    cfl: float = 0.9
    u_max_cap: float | None = None  # default: see default_sup_cap
    grow_after: int = 10
    grow_factor: float = 1.2
    max_steps: int = 2_000_000

    def __post_init__(self) -> None:
        if not 0.0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise ValueError(
                f"need 0 < dt_min <= dt_init <= dt_max, got "
                f"{self.dt_min}, {self.dt_init}, {self.dt_max}"
            )
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not self.t_end > 0.0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")

    @classmethod
    def fixed(cls, dt: float, t_end: float, **kw) -> "StepControl":
        """Constant step size; the CFL ceiling may still shorten steps."""
        return cls(t_end=t_end, dt_init=dt, dt_min=min(kw.pop("dt_min", dt * 1e-6), dt), dt_max=dt, **kw)


def _check_step(u_star: np.ndarray, u_new: np.ndarray, t: float) -> None:
    if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(u_star))):
        raise NonFinite(f"non-finite density at t={t:.6g}", t)
    scale = max(float(np.max(np.abs(u_star))), 0.0)
    if u_star.min() < -POSITIVITY_TOL * scale:
        raise PositivityLoss(f"min u = {u_star.min():.3e} at t={t:.6g}")


def _solve_chemicals_full(s: FullState, p: Params, g: RadialGrid, dt: float):
    v = implicit_helmholtz_solve(s.v + dt * p.alpha * s.u, g, dt, p.beta)
    w = implicit_helmholtz_solve(s.w + dt * p.gamma * s.u, g, dt, p.delta)
    return v, w


def step_full(
    s: FullState, p: Params, g: RadialGrid, dt: float, split_upwind: bool = False
) -> FullState:
    """Advance the three-component system by one IMEX step.

    The density is transported with the combined velocity
    ``grad(chi v - xi w)``. ``split_upwind=True`` upwinds the attractive and
    repulsive fluxes separately instead, which adds a direction-dependent
    numerical diffusion and breaks the discrete reduction to ``z``.
    """
    v, w = _solve_chemicals_full(s, p, g, dt)
    if split_upwind:
        u_star = s.u - dt * (p.chi * chemo_div(s.u, v, g) - p.xi * chemo_div(s.u, w, g))
    else:
        u_star = s.u - dt * chemo_div(s.u, p.chi * v - p.xi * w, g)
    u = implicit_helmholtz_solve(u_star, g, dt, 0.0)
    t = s.t + dt
    _check_step(u_star, u, t)
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(w))):
        raise NonFinite(f"non-finite chemical field at t={t:.6g}", t)
    return FullState(u, v, w, t)


def step_reduced(s: ReducedState, p: Params, g: RadialGrid, dt: float) -> ReducedState:
    p.require_reducible()
    z = implicit_helmholtz_solve(s.z + dt * p.sensitivity * s.u, g, dt, p.beta)
    u_star = s.u - dt * chemo_div(s.u, z, g)
    u = implicit_helmholtz_solve(u_star, g, dt, 0.0)
    t = s.t + dt
    _check_step(u_star, u, t)
    if not np.all(np.isfinite(z)):
        raise NonFinite(f"non-finite z at t={t:.6g}", t)
    return ReducedState(u, z, t)


def step(s: State, p: Params, g: RadialGrid, dt: float, split_upwind: bool = False) -> State:
    if isinstance(s, FullState):
        return step_full(s, p, g, dt, split_upwind)
    return step_reduced(s, p, g, dt)


def _chemical_potential_after(s: State, p: Params, g: RadialGrid, dt: float) -> np.ndarray:
    if isinstance(s, FullState):
        v, w = _solve_chemicals_full(s, p, g, dt)
        return p.chi * v - p.xi * w
    return implicit_helmholtz_solve(s.z + dt * p.sensitivity * s.u, g, dt, p.beta)


class Termination(str, enum.Enum):
    COMPLETED = "Completed"
    SUP_NORM_CAP = "SupNormCap"
    DT_COLLAPSE = "DtCollapse"
    NON_FINITE = "NonFinite"
    MAX_STEPS = "MaxSteps"


@dataclass
class Trajectory:
    """Accepted-step history of one integration.

    ``times[k]`` and ``u_max[k]`` describe accepted state ``k``; ``dts[k]`` is
    the step that produced state ``k + 1``. ``states`` holds every accepted
    state only when requested.
    """

    times: list[float]
    dts: list[float]
    u_max: list[float]
    mass: list[float]
    initial: State
    final: State
    reason: Termination
    t_end: float
    rejections: int = 0
    message: str = ""
    states: list[State] | None = None
    failure_time: float | None = None

    @property
    def t_last(self) -> float:
        return self.times[-1]

    @property
    def steps(self) -> int:
        return len(self.dts)


Observer = Callable[[State, float], None]


def _sup(u: np.ndarray) -> float:
    return float(np.max(np.abs(u)))


def default_sup_cap(u0: np.ndarray, g: RadialGrid) -> float:
    """Blow-up proxy: 1e6 * max(u0), or half the mass packed into the centre cell.

    No grid function of mass M exceeds M / vol_weights[0]; a density that
    large is resolution-limited, and without the second bound a collapsed
    state could creep on at tiny steps without ever tripping the cap.
    """
    return min(1e6 * _sup(u0), 0.5 * integrate_ball(u0, g) / g.vol_weights[0])


def integrate(
    s0: State,
    p: Params,
    g: RadialGrid,
    ctl: StepControl,
    observers: Sequence[Observer] = (),
    keep_states: bool = False,
    split_upwind: bool = False,
) -> Trajectory:
    """Integrate from ``s0`` to ``ctl.t_end`` or until a blow-up proxy fires.

    Observers are called as ``obs(state, dt)`` for the initial state (with
    ``dt = 0``) and after every accepted step. The step size grows by
    ``ctl.grow_factor`` after ``ctl.grow_after`` clean steps, halves on
    positivity loss and never exceeds ``cfl`` times the upwind positivity
    limit of the new chemical potential. A required step below ``dt_min``
    terminates the run with ``DtCollapse``.
    """
    if isinstance(s0, ReducedState):
        p.require_reducible()
    u0 = g.check(s0.u, "u0")
    if not np.all(np.isfinite(u0)) or u0.min() < 0.0:
        raise ValueError("initial density must be finite and nonnegative")

    u0_max = _sup(u0)
    cap = ctl.u_max_cap if ctl.u_max_cap is not None else default_sup_cap(u0, g)
    state = s0
    times, dts = [s0.t], []
    u_max, mass = [u0_max], [integrate_ball(u0, g)]
    states = [s0] if keep_states else None
    for obs in observers:
        obs(state, 0.0)

    dt_pref = ctl.dt_init
    clean = 0
    rejections = 0
    reason = Termination.COMPLETED
    message = ""
    failure_time = None
    t_tol = 1e-12 * max(1.0, abs(ctl.t_end))

    while ctl.t_end - state.t > t_tol:
        if cap > 0.0 and u_max[-1] >= cap:
            reason = Termination.SUP_NORM_CAP
            message = f"max u = {u_max[-1]:.3e} reached the cap {cap:.3e}"
            break
        if len(dts) >= ctl.max_steps:
            reason = Termination.MAX_STEPS
            message = f"step budget {ctl.max_steps} exhausted"
            break

        remaining = ctl.t_end - state.t
        dt = min(dt_pref, ctl.dt_max)
        accepted = None
        while accepted is None:
            limit = ctl.cfl * advective_step_limit(_chemical_potential_after(state, p, g, dt), g)
            if dt > limit:
                # positivity ceiling for the potential this dt produces
                dt = limit
                clean = 0
            dt_try = min(dt, remaining)
            if dt_try < ctl.dt_min and dt_try < remaining:
                break
            try:
                candidate = step(state, p, g, dt_try, split_upwind)
            except PositivityLoss as exc:
                rejections += 1
                clean = 0
                log.debug("rejected dt=%.3e: %s", dt_try, exc)
                dt = dt_try / 2.0
                dt_pref = dt
                continue
            except NonFinite as exc:
                failure_time = state.t + dt_try
                message = str(exc)
                break
            accepted = (candidate, dt_try)

        if accepted is None:
            if failure_time is not None:
                reason = Termination.NON_FINITE
            else:
                reason = Termination.DT_COLLAPSE
                message = f"admissible dt {dt:.3e} below dt_min {ctl.dt_min:.3e} at t={state.t:.6g}"
            break

        state, dt_used = accepted
        if ctl.t_end - state.t <= t_tol:
            state = type(state)(*_fields(state), ctl.t_end)
        dts.append(dt_used)
        times.append(state.t)
        u_max.append(_sup(state.u))
        mass.append(integrate_ball(state.u, g))
        if states is not None:
            states.append(state)
        for obs in observers:
            obs(state, dt_used)

        clean += 1
        dt_pref = max(dt_pref if dt_used >= dt_pref else dt_used, ctl.dt_min)
        if clean >= ctl.grow_after:
            dt_pref = min(dt_pref * ctl.grow_factor, ctl.dt_max)
            clean = 0

    if reason is not Termination.COMPLETED:
        log.info("integration stopped: %s (%s)", reason.value, message)
    return Trajectory(
        times=times,
        dts=dts,
        u_max=u_max,
        mass=mass,
        initial=s0,
        final=state,
        reason=reason,
        t_end=ctl.t_end,
        rejections=rejections,
        message=message,
        states=states,
        failure_time=failure_time,
    )


def _fields(s: State) -> tuple:
    if isinstance(s, FullState):
        return (s.u, s.v, s.w)
    return (s.u, s.z)


def constant_steady_state(ubar: float, p: Params, g: RadialGrid) -> FullState:
    """Spatially constant equilibrium with density ``ubar``."""
    ones = np.ones(g.N)
    return FullState(ubar * ones, p.alpha * ubar / p.beta * ones, p.gamma * ubar / p.delta * ones)
