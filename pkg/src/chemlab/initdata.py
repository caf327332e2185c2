"""Initial triples ``(u0, v0, w0)``.

Besides constant and Gaussian data, two concentrating families are built
whose initial energy tends to ``-inf`` as the concentration scale ``eta``
shrinks:

* ``highdim`` (n > 4): ``u = (m-eps)/|B| + eps phi(r/eta) eta^-n``,
  ``v = w = phi(r/eta) eta^-rho``;
* ``critical4`` (n = 4): same ``u``, and
  ``v = w = (R^2-r^2)^N (ln(R/eta))^-kappa ln((R^2+eta^2)/(r^2+eta^2))``.

In both, the bump part of ``u`` is rescaled so that the discrete mass is
exactly ``m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .grid import RadialGrid, helmholtz_solve, integrate, sphere_measure

FAMILIES = ("constant", "gaussian", "highdim", "critical4")


class BumpPhi:
    """``phi(y) = c_n exp(-1/(1-|y|^2))`` on the unit ball, unit mass in R^n."""

    def __init__(self, n: int):
        self.n = int(n)
        self.c = _bump_constant(self.n)

    def __call__(self, y):
        y = np.abs(np.asarray(y, dtype=float))
        out = np.zeros_like(y)
        inside = y < 1.0
        out[inside] = self.c * np.exp(-1.0 / (1.0 - y[inside] ** 2))
        return out

    def radial_integral(self, func) -> float:
        """``int_{R^n} func(phi)(|y|) dy`` by adaptive quadrature."""
        om = sphere_measure(self.n)
        val, _ = quad(lambda r: func(self(np.array([r]))[0]) * r ** (self.n - 1), 0.0, 1.0,
                      epsabs=0.0, epsrel=1e-12, limit=200)
        return om * val


@lru_cache(maxsize=None)
def _bump_constant(n: int) -> float:
    om = sphere_measure(n)
    val, _ = quad(lambda r: math.exp(-1.0 / (1.0 - r * r)) * r ** (n - 1), 0.0, 1.0,
                  epsabs=0.0, epsrel=1e-13, limit=200)
    return 1.0 / (om * val)


@dataclass(frozen=True)
class InitFamilyParams:
    family: str = "gaussian"
    m: float = 1.0
    eps_mass: float | None = None
    eta: float | None = None
    rho: float | None = None
    gamma: float = 1.0
    kappa: float = 0.25
    N_psi: int = 3
    theta_log: float = 0.5
    width: float = 0.25

    def resolved(self, n: int, R: float) -> "InitFamilyParams":
        """Validate against ``(n, R)`` and fill the derived defaults.

        Raises ``ValueError`` whose message starts with the offending key.
        """
        if self.family not in FAMILIES:
            raise ValueError(f"family: unknown family {self.family!r}")
        if not self.m > 0:
            raise ValueError("m: total mass must be positive")
        if not self.width > 0:
            raise ValueError("width: must be positive")
        out = self
        if self.family not in ("highdim", "critical4"):
            return out
        vol = sphere_measure(n) / n * R**n
        lo, hi = max(0.0, self.m - vol), self.m
        eps = self.eps_mass
        if eps is None:
            eps = self.m / 2.0
            if not lo < eps < hi:
                eps = 0.5 * (lo + hi)
        elif not lo < eps < hi:
            raise ValueError(f"eps_mass: must lie in ({lo:g}, {hi:g})")
        if self.eta is None:
            raise ValueError("eta: required for the concentrating families")
        if self.family == "highdim":
            if n <= 4:
                raise ValueError("family: highdim needs n > 4")
            if not 0 < self.eta < R:
                raise ValueError("eta: must lie in (0, R)")
            try:
                rho = choose_varrho(n, self.gamma) if self.rho is None else float(self.rho)
            except ValueError as exc:
                raise ValueError(f"gamma: {exc}") from None
            if not _rho_ok(n, self.gamma, rho):
                raise ValueError(f"rho: must lie in ({max(0.0, n - n * self.gamma):g}, {n - 4:g})")
            out = replace(out, rho=rho)
        else:
            if n != 4:
                raise ValueError("family: critical4 needs n = 4")
            if not 0 < self.eta < R / 2:
                raise ValueError("eta: must lie in (0, R/2)")
            if not 0 < self.theta_log < 1:
                raise ValueError("theta_log: must lie in (0, 1)")
            if not 0 < self.kappa < 1 - self.theta_log:
                raise ValueError("kappa: must lie in (0, 1 - theta_log)")
            if int(self.N_psi) != self.N_psi or self.N_psi <= 2:
                raise ValueError("N_psi: must be an integer > 2")
        return replace(out, eps_mass=eps)


def _rho_ok(n, gamma, rho) -> bool:
    checks = (
        -rho < -2 * rho + n,
        -rho < -2 * rho - 2 + n,
        -rho < -2 * rho - 4 + n,
        -rho < -(1 - gamma) * n,
    )
    return rho > 0 and all(checks)


def choose_varrho(n: int, gamma: float) -> float:
    """Midpoint of ``(max(0, n - n gamma), n - 4)``; checked against all four inequalities."""
    lo, hi = max(0.0, n - n * gamma), n - 4.0
    if n <= 4 or gamma <= 4.0 / n or not lo < hi:
        raise ValueError(f"empty rho interval for n={n}, gamma={gamma} (need n > 4, gamma > 4/n)")
    rho = 0.5 * (lo + hi)
    if not _rho_ok(n, gamma, rho):
        raise ValueError(f"rho={rho} violates the admissibility inequalities")
    return rho


def _bump_u(g: RadialGrid, p: InitFamilyParams):
    phi = BumpPhi(g.n)
    bump = phi(g.centers / p.eta) * p.eta ** (-g.n)
    total = integrate(g, bump)
    if total <= 0:
        raise ValueError("eta: bump not resolved by the grid")
    background = (p.m - p.eps_mass) / float(np.sum(g.volumes))
    return background + p.eps_mass * bump / total


def make_highdim(g: RadialGrid, p: InitFamilyParams):
    p = replace(p, family="highdim").resolved(g.n, g.R)
    u = _bump_u(g, p)
    v = BumpPhi(g.n)(g.centers / p.eta) * p.eta ** (-p.rho)
    return u, v, v.copy()


def critical4_profile(r, R, eta, kappa, N_psi):
    psi = (R * R - r * r) ** N_psi
    return psi * math.log(R / eta) ** (-kappa) * np.log((R * R + eta * eta) / (r * r + eta * eta))


def make_critical4(g: RadialGrid, p: InitFamilyParams):
    p = replace(p, family="critical4").resolved(g.n, g.R)
    u = _bump_u(g, p)
    v = critical4_profile(g.centers, g.R, p.eta, p.kappa, int(p.N_psi))
    return u, v, v.copy()


def make_constant(g: RadialGrid, m: float):
    c = m / float(np.sum(g.volumes))
    return g.full(c), g.full(c), g.full(c)


def make_gaussian(g: RadialGrid, m: float, width: float = 0.25):
    """Mass-normalized ``exp(-r^2/width^2)``; ``v = w`` is one Helmholtz smoothing of it."""
    u = np.exp(-((g.centers / width) ** 2))
    u *= m / integrate(g, u)
    v = helmholtz_solve(g, u)
    return u, v, v.copy()


def make_initial(g: RadialGrid, p: InitFamilyParams):
    p = p.resolved(g.n, g.R)
    if p.family == "constant":
        return make_constant(g, p.m)
    if p.family == "gaussian":
        return make_gaussian(g, p.m, p.width)
    if p.family == "highdim":
        return make_highdim(g, p)
    return make_critical4(g, p)
