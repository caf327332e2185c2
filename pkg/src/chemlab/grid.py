"""Cell-centred radial mesh on a ball and its conservative operators.

Fields are plain 1-D numpy arrays of cell values; face quantities have one
more entry than the field (faces ``0..N`` at ``r = i R / N``).  All operators
impose homogeneous Neumann data: the flux through ``r = R`` is zero and the
face at the origin has zero area for ``n >= 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack


class SolverError(RuntimeError):
    pass


def sphere_measure(n: int) -> float:
    """Surface measure of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def ball_volume(n: int, R: float) -> float:
    return sphere_measure(n) / n * R**n


@dataclass(frozen=True, eq=False)
class RadialGrid:
    n: int
    R: float
    N: int
    dr: float = field(init=False)
    faces: np.ndarray = field(init=False, repr=False)
    centers: np.ndarray = field(init=False, repr=False)
    areas: np.ndarray = field(init=False, repr=False)
    volumes: np.ndarray = field(init=False, repr=False)
    omega: float = field(init=False)
    # weight of each face in a face-sampled integral: dual-cell volume A * dr,
    # zero on the two boundary faces where gradients vanish
    face_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        set_ = object.__setattr__
        dr = self.R / self.N
        faces = dr * np.arange(self.N + 1)
        faces[-1] = self.R
        omega = sphere_measure(self.n)
        areas = omega * faces ** (self.n - 1)
        pw = faces**self.n
        volumes = omega / self.n * (pw[1:] - pw[:-1])
        fw = areas * dr
        fw[0] = 0.0
        fw[-1] = 0.0
        for name, value in (
            ("dr", dr),
            ("faces", faces),
            ("centers", 0.5 * (faces[1:] + faces[:-1])),
            ("areas", areas),
            ("volumes", volumes),
            ("omega", omega),
            ("face_weights", fw),
        ):
            if isinstance(value, np.ndarray):
                value.setflags(write=False)
            set_(self, name, value)

    @property
    def measure(self) -> float:
        """|B_R| in closed form."""
        return ball_volume(self.n, self.R)

    def zeros(self):
        return np.zeros(self.N)

    def full(self, c):
        return np.full(self.N, float(c))


def build_grid(n: int, R: float, N: int, *, diagnostic_1d: bool = False) -> RadialGrid:
    if n == 1 and not diagnostic_1d:
        raise ValueError("n = 1 is available only in diagnostic mode")
    if n < 1 or (n < 2 and not diagnostic_1d):
        raise ValueError("space dimension must be >= 2")
    if not R > 0:
        raise ValueError("ball radius must be positive")
    if int(N) != N or N < 8:
        raise ValueError("need at least 8 cells")
    return RadialGrid(int(n), float(R), int(N))


def integrate(g: RadialGrid, x) -> float:
    """Volume-weighted sum, the discrete counterpart of an integral over B_R."""
    return float(np.dot(g.volumes, x))


def integrate_faces(g: RadialGrid, y) -> float:
    """Integral of a face-sampled quantity using dual-cell weights."""
    return float(np.dot(g.face_weights, y))


def gradient_faces(g: RadialGrid, x):
    out = np.zeros(g.N + 1)
    out[1:-1] = np.diff(x) / g.dr
    return out


def divergence(g: RadialGrid, F):
    flux = g.areas * F
    return (flux[1:] - flux[:-1]) / g.volumes


def laplacian(g: RadialGrid, x):
    return divergence(g, gradient_faces(g, x))


def face_average(x):
    """Arithmetic mean of neighbouring cells on interior faces (boundaries 0)."""
    out = np.zeros(x.size + 1)
    out[1:-1] = 0.5 * (x[1:] + x[:-1])
    return out


def diffusion_bands(g: RadialGrid, coeff=None):
    """Bands of ``-div(coeff grad .)`` as (lower, diag, upper).

    ``coeff`` is a face array (interior entries used); ``None`` means 1.
    """
    c = g.areas[1:-1] / g.dr
    if coeff is not None:
        c = c * coeff[1:-1]
    vol = g.volumes
    lower = -c / vol[1:]
    upper = -c / vol[:-1]
    diag = np.zeros(g.N)
    diag[:-1] += c / vol[:-1]
    diag[1:] += c / vol[1:]
    return lower, diag, upper


def solve_tridiagonal(lower, diag, upper, rhs):
    """Direct tridiagonal solve (LAPACK gtsv); raises SolverError on failure."""
    _, _, _, x, info = lapack.dgtsv(lower, diag, upper, rhs)
    if info != 0 or not np.all(np.isfinite(x)):
        raise SolverError(f"tridiagonal solve failed (info={info})")
    return x


def helmholtz_solve(g: RadialGrid, b, dt_scale=None):
    """Solve ``(-Lap_h + 1) x = b``, or ``(1 - t Lap_h + t) x = b`` with ``dt_scale=t``."""
    lower, diag, upper = diffusion_bands(g)
    if dt_scale is None:
        diag = diag + 1.0
    else:
        t = float(dt_scale)
        lower, upper = t * lower, t * upper
        diag = 1.0 + t * diag + t
    return solve_tridiagonal(lower, diag, upper, np.asarray(b, dtype=float))
