"""Conservative radial operators with zero-flux faces at r = 0 and r = R.

Fields are plain 1-D float arrays of length ``grid.N``. Every operator is a
difference of face fluxes divided by the cell measure, so the ``vol_weights``
sum of any output telescopes to zero.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.linalg import solve_banded

from .grid import RadialGrid, face_gradient


def _flux_divergence(flux: np.ndarray, g: RadialGrid) -> np.ndarray:
    # flux holds area-weighted values at all N + 1 faces
    return (flux[1:] - flux[:-1]) / g.vol_weights


def radial_gradient(f: np.ndarray, g: RadialGrid) -> np.ndarray:
    """Face values of df/dr (length N + 1), zero at both boundary faces."""
    return face_gradient(f, g)


def laplacian(f: np.ndarray, g: RadialGrid) -> np.ndarray:
    """r^{1-n} d/dr (r^{n-1} df/dr) with homogeneous Neumann conditions."""
    return _flux_divergence(g.face_areas * face_gradient(f, g), g)


def upwind_face_values(u: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Face values of ``u`` taken from the cell upstream of velocity ``q``.

    ``q`` lives on all N + 1 faces; the two boundary entries are returned as
    zero (their velocity is zero anyway).
    """
    face = np.zeros_like(q)
    inner = q[1:-1]
    face[1:-1] = np.where(inner >= 0.0, u[:-1], u[1:])
    return face


def chemo_div(u: np.ndarray, s: np.ndarray, g: RadialGrid) -> np.ndarray:
    """Upwind flux-form approximation of div(u grad s).

    The velocity at each face is the centered difference of ``s``; ``u`` is
    transported up the gradient of ``s``.
    """
    u = g.check(u, "u")
    q = face_gradient(s, g)
    return _flux_divergence(g.face_areas * q * upwind_face_values(u, q), g)


def advective_step_limit(s: np.ndarray, g: RadialGrid) -> float:
    """Largest dt for which ``u - dt * chemo_div(u, s)`` stays nonnegative.

    This is the sharp upwind bound: cell ``i`` loses at most a fraction
    ``dt * outflow_i / vol_weights[i]`` of its content. Returns ``inf`` when
    ``s`` is flat.
    """
    q = face_gradient(s, g)
    flow = g.face_areas * q
    outflow = np.maximum(flow[1:], 0.0) + np.maximum(-flow[:-1], 0.0)
    with np.errstate(divide="ignore"):
        limits = np.where(outflow > 0.0, g.vol_weights / np.where(outflow > 0.0, outflow, 1.0), np.inf)
    return float(limits.min())


@lru_cache(maxsize=64)
def _laplacian_bands(g: RadialGrid) -> tuple[np.ndarray, np.ndarray]:
    # off-diagonal couplings of Delta_h: lower[i] couples i to i-1, upper[i] to i+1
    conductance = g.face_areas / g.h
    lower = conductance[:-1] / g.vol_weights
    upper = conductance[1:] / g.vol_weights
    lower[0] = 0.0
    upper[-1] = 0.0
    return lower, upper


def laplacian_matrix_bands(g: RadialGrid) -> np.ndarray:
    """Delta_h in ``solve_banded`` layout (3, N): upper, main, lower diagonals."""
    lower, upper = _laplacian_bands(g)
    ab = np.zeros((3, g.N))
    ab[0, 1:] = upper[:-1]
    ab[1] = -(lower + upper)
    ab[2, :-1] = lower[1:]
    return ab


def implicit_helmholtz_solve(
    rhs: np.ndarray, g: RadialGrid, dt: float, decay: float = 0.0
) -> np.ndarray:
    """Solve (I - dt Delta_h + dt decay I) x = rhs by a direct tridiagonal solve."""
    rhs = g.check(rhs, "rhs")
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if decay < 0.0:
        raise ValueError(f"decay must be nonnegative, got {decay}")
    ab = -dt * laplacian_matrix_bands(g)
    ab[1] += 1.0 + dt * decay
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def helmholtz_apply(x: np.ndarray, g: RadialGrid, dt: float, decay: float = 0.0) -> np.ndarray:
    """(I - dt Delta_h + dt decay I) x, the forward map of the implicit solve."""
    return x - dt * laplacian(x, g) + dt * decay * x
