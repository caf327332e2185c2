"""Discrete checks of the integral identities behind the blowup argument.

Three checks are provided, each returning an :class:`IdentityReport`:

* ``hardy_rellich_check``  -- radial Hardy-Rellich inequality in R^4,
  ``int |Lap u|^2 >= 4 int |grad u|^2 / |x|^2``;
* ``pohozaev_check``       -- ``-int Lap^2 v (x . grad v)`` against
  ``(n-4)/2 int |Lap v|^2 + omega_n R^n v_rr(R)^2 / 2``;
* ``weighted_identity_check`` -- the cut-off weighted inequality for n = 4
  stationary solutions with ``xi = ln((R^2+eta)/(r^2+eta))``.

Gradient-squared integrands are sampled on interior faces, where ``r > 0``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .grid import RadialGrid, face_average, gradient_faces, integrate, integrate_faces, laplacian

DEFAULT_TOL = 1e-6


@dataclass
class IdentityReport:
    check: str
    n: int
    N: int
    lhs: float
    rhs: float
    passed: bool
    extra: dict = field(default_factory=dict)

    @property
    def abs_residual(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def rel_residual(self) -> float:
        return self.abs_residual / max(abs(self.lhs), abs(self.rhs), 1.0)

    def record(self) -> dict:
        """Flat JSON record used by the ``verify`` subcommand."""
        return {
            "check": self.check,
            "n": self.n,
            "N": self.N,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "rel_residual": self.rel_residual,
            "pass": bool(self.passed),
            **self.extra,
        }


class CutoffXi:
    """``xi(r) = ln((R^2 + eta) / (r^2 + eta))`` and its closed-form derivatives."""

    def __init__(self, R: float, eta: float):
        if not 0 < eta < 1:
            raise ValueError("eta must lie in (0, 1)")
        self.R = float(R)
        self.eta = float(eta)

    def xi(self, r):
        return np.log((self.R**2 + self.eta) / (r**2 + self.eta))

    def d1(self, r):
        return -2.0 * r / (r**2 + self.eta)

    def d2(self, r):
        return (2.0 * r**2 - 2.0 * self.eta) / (r**2 + self.eta) ** 2

    def d3(self, r):
        return (12.0 * self.eta * r - 4.0 * r**3) / (r**2 + self.eta) ** 3

    def J(self, r):
        """``-xi''' r + 3 xi'' - 3 xi' / r``, equal to ``16 r^4 / (r^2+eta)^3``."""
        return 16.0 * r**4 / (r**2 + self.eta) ** 3

    def J_from_derivatives(self, r):
        return -self.d3(r) * r + 3.0 * self.d2(r) - 3.0 * self.d1(r) / r


def _ghost_neumann(v):
    """Ghost value beyond r = R from a cubic with zero slope at R (O(dr^4))."""
    return (21.0 * v[-1] + 3.0 * v[-2] - v[-3]) / 23.0


def _gradient_ghost(g: RadialGrid, v):
    grad = gradient_faces(g, v)
    grad[-1] = (_ghost_neumann(v) - v[-1]) / g.dr
    return grad


def second_derivative_at_boundary(g: RadialGrid, v) -> float:
    """``v_rr(R)`` for a field with ``v_r(R) = 0``, second order one-sided."""
    d1 = v[-2] - v[-1]
    d2 = v[-3] - v[-1]
    return (62.0 * d1 - 13.0 * d2) / (23.0 * g.dr**2)


def biharmonic(g: RadialGrid, v):
    """``Lap_h(Lap_h v)`` for ``v`` with a zero normal derivative at R.

    The inner Laplacian takes its boundary flux from the high-order ghost;
    ``Lap v`` itself has a nonzero normal derivative, so the outer one uses a
    second-order one-sided slope at ``R`` instead of a zero flux.
    """
    lap = (g.areas[1:] * _gradient_ghost(g, v)[1:] - g.areas[:-1] * _gradient_ghost(g, v)[:-1]) / g.volumes
    grad = gradient_faces(g, lap)
    grad[-1] = (2.0 * lap[-1] - 3.0 * lap[-2] + lap[-3]) / g.dr
    flux = g.areas * grad
    return lap, (flux[1:] - flux[:-1]) / g.volumes


def hardy_rellich_check(g: RadialGrid, u, tol=DEFAULT_TOL) -> IdentityReport:
    if g.n != 4:
        raise ValueError("the radial Hardy-Rellich check is for n = 4")
    lhs = integrate(g, laplacian(g, u) ** 2)
    grad = gradient_faces(g, u)
    r = g.faces
    hardy = np.zeros_like(r)
    hardy[1:-1] = grad[1:-1] ** 2 / r[1:-1] ** 2
    hardy_int = integrate_faces(g, hardy)
    rhs = 4.0 * hardy_int
    ratio = lhs / hardy_int if hardy_int > 0 else float("inf")
    return IdentityReport(
        "hardy", g.n, g.N, lhs, rhs, bool(lhs >= rhs - tol), {"ratio": ratio}
    )


def pohozaev_check(g: RadialGrid, v, tol=DEFAULT_TOL) -> IdentityReport:
    lap, bilap = biharmonic(g, v)
    grad = _gradient_ghost(g, v)
    x_dot_grad = g.centers * 0.5 * (grad[1:] + grad[:-1])
    lhs = -integrate(g, bilap * x_dot_grad)
    vrr = second_derivative_at_boundary(g, v)
    rhs = 0.5 * (g.n - 4) * integrate(g, lap**2) + 0.5 * g.omega * g.R**g.n * vrr**2
    rep = IdentityReport("pohozaev", g.n, g.N, lhs, rhs, False, {"v_rr_R": vrr})
    rep.passed = rep.rel_residual <= tol
    return rep


def weighted_identity_check(g: RadialGrid, sol, eta: float, kin, s0=2.0,
                            tol=DEFAULT_TOL, residual_limit=1e-8) -> IdentityReport:
    """Both sides of the xi-weighted inequality for an n = 4 stationary solution.

    Holds exactly for true solutions; for computed ones the report's
    ``margin = rhs - lhs`` is the quantity of interest.
    """
    if g.n != 4:
        raise ValueError("the weighted identity is stated for n = 4")
    if not sol.converged or sol.residual > residual_limit:
        raise ValueError("stationary solution is not converged")
    from .kinetics import eval_H

    cut = CutoffXi(g.R, eta)
    rc, rf = g.centers, g.faces
    lap = laplacian(g, sol.v)
    grad = gradient_faces(g, sol.v)
    grad2 = grad**2
    v_face = face_average(sol.v)

    lhs = (
        -1.5 * integrate(g, cut.d1(rc) * rc * lap**2)
        + 2.0 * integrate_faces(g, cut.xi(rf) * grad2)
        - integrate_faces(g, cut.d1(rf) * rf * grad2)
    )
    h_term = 4.0 * integrate(g, cut.xi(rc) * eval_H(kin, sol.u, s0))
    drift_term = integrate_faces(g, (v_face + s0) * cut.xi(rf) * rf * np.abs(grad))
    j_term = 0.5 * integrate_faces(g, cut.J(rf) * grad2)
    rhs = h_term + drift_term + j_term
    return IdentityReport(
        "weighted",
        g.n,
        g.N,
        lhs,
        rhs,
        bool(lhs <= rhs + tol),
        {"eta": eta, "margin": rhs - lhs, "h_term": h_term, "drift_term": drift_term, "j_term": j_term},
    )


def report_dict(rep: IdentityReport) -> dict:
    return asdict(rep) | {"abs_residual": rep.abs_residual, "rel_residual": rep.rel_residual}
