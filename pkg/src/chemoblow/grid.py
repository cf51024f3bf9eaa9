"""Cell-centered radial mesh on the ball B(0, R) in R^n and ball quadrature."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gamma, pi

import numpy as np


def unit_sphere_area(n: int) -> float:
    """Surface measure of the unit sphere S^{n-1} in R^n, 2 pi^{n/2} / Gamma(n/2)."""
    return 2.0 * pi ** (n / 2.0) / gamma(n / 2.0)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Uniform cell-centered mesh of (0, R).

    Cell ``i`` has center ``r[i] = (i + 1/2) h`` and quadrature weight
    ``vol_weights[i] = omega * r[i]**(n-1) * h``. Faces sit at ``j h`` for
    ``j = 0..N``; the faces at r = 0 and r = R carry zero flux.
    """

    R: float
    n: int
    N: int
    h: float = field(init=False)
    omega: float = field(init=False)
    r: np.ndarray = field(init=False, repr=False)
    r_faces: np.ndarray = field(init=False, repr=False)
    vol_weights: np.ndarray = field(init=False, repr=False)
    face_areas: np.ndarray = field(init=False, repr=False)
    cell_measure: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        h = self.R / self.N
        omega = unit_sphere_area(self.n)
        r = (np.arange(self.N) + 0.5) * h
        r_faces = np.arange(self.N + 1) * h
        # r^{n-1} h, the radial cell measure without the sphere factor
        cell_measure = r ** (self.n - 1) * h
        face_areas = omega * r_faces ** (self.n - 1)
        for name, value in [
            ("h", h),
            ("omega", omega),
            ("r", r),
            ("r_faces", r_faces),
            ("vol_weights", omega * cell_measure),
            ("face_areas", face_areas),
            ("cell_measure", cell_measure),
        ]:
            if isinstance(value, np.ndarray):
                value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def volume(self) -> float:
        """Exact |B(0, R)| = omega R^n / n."""
        return self.omega * self.R**self.n / self.n

    @property
    def face_weights(self) -> np.ndarray:
        """Quadrature weights a_{j} h for quantities living on the N + 1 faces."""
        return self.face_areas * self.h

    def check(self, f: np.ndarray, name: str = "field") -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != (self.N,):
            raise ValueError(f"{name} has shape {f.shape}, grid expects ({self.N},)")
        return f


def build_grid(R: float = 1.0, n: int = 3, N: int = 128) -> RadialGrid:
    if not R > 0:
        raise ValueError(f"radius must be positive, got R={R}")
    if int(n) != n or n < 2:
        raise ValueError(f"dimension must be an integer >= 2, got n={n}")
    if int(N) != N or N < 8:
        raise ValueError(f"need at least 8 cells, got N={N}")
    return RadialGrid(float(R), int(n), int(N))


def integrate_ball(f: np.ndarray, g: RadialGrid) -> float:
    """Midpoint approximation of the integral of a radial function over the ball."""
    f = g.check(f)
    return float(np.dot(f, g.vol_weights))


def face_gradient(f: np.ndarray, g: RadialGrid) -> np.ndarray:
    """Centered differences at the N + 1 faces; zero slope at r = 0 and r = R."""
    f = g.check(f)
    grad = np.zeros(g.N + 1)
    grad[1:-1] = np.diff(f) / g.h
    return grad


def integrate_faces(q: np.ndarray, g: RadialGrid) -> float:
    """Quadrature of a face quantity, e.g. |df/dr|^2, over the ball."""
    return float(np.dot(q, g.face_weights))


def norm_W12(f: np.ndarray, g: RadialGrid) -> float:
    """Discrete W^{1,2}(ball) norm of a radial field."""
    f = g.check(f)
    grad = face_gradient(f, g)
    return float(np.sqrt(integrate_ball(f * f, g) + integrate_faces(grad * grad, g)))


def norm_Lp(f: np.ndarray, g: RadialGrid, p: float) -> float:
    f = g.check(f)
    return integrate_ball(np.abs(f) ** p, g) ** (1.0 / p)
