"""Lyapunov functional, dissipation rate and the discrete energy inequality.

For z = chi v - xi w with net production k = chi alpha - xi gamma and common
decay b = beta = delta::

    F(u, z) = 1/2 |grad z|^2 + b/2 z^2 - k u z + k u ln u      (integrated)
    D(u, z) = z_t^2 + k u |grad ln u - grad z|^2                (integrated)

With unit rates, k = chi - xi and b = 1. ``energy_G`` evaluates the same
functional on (u, v, w) through z = chi v - xi w; both share one code path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import FullState, Params, ReducedState, State
from .grid import RadialGrid, face_gradient, integrate_ball, integrate_faces
from .operators import laplacian

LOG_FLOOR = 1e-300


class NonPositiveDensity(ValueError):
    pass


def _coefficients(p: Params) -> tuple[float, float]:
    p.require_reducible()
    k = p.sensitivity
    if k < 0.0:
        raise ValueError(f"chi alpha - xi gamma = {k} < 0: energy structure requires attraction to dominate")
    return k, p.beta


def _density(u: np.ndarray, g: RadialGrid, floor: float | None) -> np.ndarray:
    u = g.check(u, "u")
    if floor is None:
        if np.any(~(u > 0.0)):
            raise NonPositiveDensity(f"density has {int(np.sum(~(u > 0.0)))} nonpositive cells")
        return u
    return np.maximum(u, floor)


def u_log_u(u: np.ndarray) -> np.ndarray:
    """Pointwise u ln u with 0 ln 0 = 0; values below 1e-300 contribute zero."""
    out = np.zeros_like(u, dtype=float)
    pos = u > LOG_FLOOR
    out[pos] = u[pos] * np.log(u[pos])
    return out


def energy_F(
    u: np.ndarray, z: np.ndarray, p: Params, g: RadialGrid, floor: float | None = None
) -> float:
    """Energy of the reduced system.

    ``floor=None`` rejects any nonpositive density; passing a floor clamps
    ``u`` from below instead (use ``LOG_FLOOR`` for the continuous extension).
    """
    k, b = _coefficients(p)
    u = _density(u, g, floor)
    z = g.check(z, "z")
    dz = face_gradient(z, g)
    return (
        0.5 * integrate_faces(dz * dz, g)
        + 0.5 * b * integrate_ball(z * z, g)
        - k * integrate_ball(u * z, g)
        + k * integrate_ball(u_log_u(u), g)
    )


def energy_G(
    u0: np.ndarray,
    v0: np.ndarray,
    w0: np.ndarray,
    p: Params,
    g: RadialGrid,
    floor: float | None = None,
) -> float:
    """Energy of the three-component data, i.e. ``energy_F(u0, chi v0 - xi w0)``."""
    return energy_F(u0, p.chi * g.check(v0, "v0") - p.xi * g.check(w0, "w0"), p, g, floor)


def z_rate(u: np.ndarray, z: np.ndarray, p: Params, g: RadialGrid) -> np.ndarray:
    """Right-hand side of the z equation on the grid, Lap_h z - b z + k u."""
    return laplacian(z, g) - p.beta * z + p.sensitivity * u


def harmonic_face_mean(u: np.ndarray) -> np.ndarray:
    """Harmonic mean of neighbouring cells at the N + 1 faces; zero on the boundary."""
    face = np.zeros(u.size + 1)
    a, b = u[:-1], u[1:]
    s = a + b
    face[1:-1] = np.where(s > 0.0, 2.0 * a * b / np.where(s > 0.0, s, 1.0), 0.0)
    return face


def entropy_velocity(u: np.ndarray, z: np.ndarray, g: RadialGrid) -> np.ndarray:
    """Face values of grad ln u - grad z (zero on the boundary faces)."""
    return face_gradient(np.log(u), g) - face_gradient(z, g)


def dissipation_D(
    u: np.ndarray, z: np.ndarray, p: Params, g: RadialGrid, floor: float | None = None
) -> float:
    """Instantaneous dissipation rate with z_t taken from the discrete z equation."""
    k, _ = _coefficients(p)
    u = _density(u, g, floor)
    z = g.check(z, "z")
    zt = z_rate(u, z, p, g)
    vel = entropy_velocity(u, z, g)
    return integrate_ball(zt * zt, g) + k * integrate_faces(harmonic_face_mean(u) * vel * vel, g)


def entropy_flux_rate(u: np.ndarray, z: np.ndarray, g: RadialGrid) -> np.ndarray:
    """div(u_f (grad ln u - grad z)) assembled from the harmonic-mean face fluxes.

    This is the density rate for which the discrete summation by parts
    ``sum w u_t (ln u - z) = -int u_f |grad ln u - grad z|^2`` is exact.
    """
    flux = g.face_areas * harmonic_face_mean(u) * entropy_velocity(u, z, g)
    return (flux[1:] - flux[:-1]) / g.vol_weights


@dataclass(frozen=True)
class EnergyRecord:
    t: float
    F: float
    D: float
    mass: float
    u_max: float
    dt: float  # step that produced this record; 0 for the initial state


class EnergyLedger:
    """Observer that appends an ``EnergyRecord`` for every accepted state.

    Records F and D evaluated on z = chi v - xi w for full states (so the
    first record is G of the initial data). When the rates are not
    reducible, F and D are recorded as NaN.
    """

    def __init__(self, p: Params, g: RadialGrid):
        self.p = p
        self.g = g
        self.records: list[EnergyRecord] = []
        self._valid = p.reducible and p.sensitivity >= 0.0

    def __call__(self, state: State, dt: float) -> None:
        u = state.u
        z = state.potential(self.p)
        if self._valid:
            F = energy_F(u, z, self.p, self.g, floor=LOG_FLOOR)
            D = dissipation_D(u, z, self.p, self.g, floor=LOG_FLOOR)
        else:
            F = D = float("nan")
        self.records.append(
            EnergyRecord(
                t=float(state.t),
                F=F,
                D=D,
                mass=integrate_ball(u, self.g),
                u_max=float(np.max(np.abs(u))),
                dt=float(dt),
            )
        )


@dataclass
class InequalityReport:
    residuals: np.ndarray = field(repr=False)
    max_residual: float
    violation_fraction: float
    tol: float
    passed: bool
    # A splitting scheme satisfies the inequality only up to O(dt); the
    # meaningful check is that max_residual shrinks under dt refinement,
    # see ``residual_orders``.
    note: str = "violations must shrink at first order under dt refinement"


def energy_residuals(ledger: list[EnergyRecord]) -> np.ndarray:
    """r_k = (F_{k+1} - F_k) / dt_k + D_k for consecutive ledger entries."""
    if len(ledger) < 2:
        raise ValueError("energy ledger needs at least two records")
    F = np.array([rec.F for rec in ledger])
    D = np.array([rec.D for rec in ledger])
    dt = np.array([rec.dt for rec in ledger[1:]])
    return (F[1:] - F[:-1]) / dt + D[:-1]


def default_energy_tol(ledger: list[EnergyRecord]) -> float:
    span = max(ledger[-1].t - ledger[0].t, np.finfo(float).tiny)
    return 1e-4 * max(abs(ledger[0].F), 1.0) / span


def check_energy_inequality(
    ledger: list[EnergyRecord], tol: float | None = None
) -> InequalityReport:
    r = energy_residuals(ledger)
    tol = default_energy_tol(ledger) if tol is None else tol
    worst = float(np.max(r))
    return InequalityReport(
        residuals=r,
        max_residual=worst,
        violation_fraction=float(np.mean(r > tol)),
        tol=tol,
        passed=bool(worst <= tol),
    )


def residual_orders(max_residuals: list[float], ratio: float = 2.0) -> np.ndarray:
    """Observed convergence orders of successive worst residuals under dt / ratio."""
    e = np.asarray(max_residuals, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(ratio)


def state_energy(state: State, p: Params, g: RadialGrid, floor: float | None = None) -> float:
    if isinstance(state, FullState):
        return energy_G(state.u, state.v, state.w, p, g, floor)
    assert isinstance(state, ReducedState)
    return energy_F(state.u, state.z, p, g, floor)
