"""Radial stationary states with prescribed mass.

The first equation ``D(u) grad u = S(u) grad v`` reduces to
``f(u) = v + L``; what remains is a fixed point in ``v``:

    v  ->  u = f^-1(v + L),  L fixed by  int u = m
       ->  (-Lap_h + 1) w = u,  (-Lap_h + 1) v_new = w

iterated with damping.  ``closure="flux"`` replaces the pointwise inverse by
a cell-to-cell march that zeroes the simulator's discrete flux (arithmetic
mean ``D``, upwind ``S``), so a converged state is a fixed point of
:func:`chemlab.simulator.step` rather than only of the continuous relation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .diagnostics import energy, upwind_faces
from .grid import RadialGrid, face_average, gradient_faces, helmholtz_solve, integrate, laplacian
from .kinetics import DEFAULT_S0, OutOfDomainError, eval_G
from .state import State

CLOSURES = ("exact", "flux")


class StationaryError(RuntimeError):
    pass


@dataclass
class StationarySolution:
    grid: RadialGrid
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    L: float
    m: float
    residuals: dict
    iterations: int
    converged: bool
    closure: str = "exact"
    history: list = field(default_factory=list, repr=False)

    @property
    def residual(self) -> float:
        """Largest residual among the equations this closure enforces."""
        keys = ("v_eq", "w_eq", "f_minus_v" if self.closure == "exact" else "flux")
        return max(self.residuals[k] for k in keys)

    def state(self, t=0.0) -> State:
        return State(self.grid, t, self.u.copy(), self.v.copy(), self.w.copy())

    def record(self) -> dict:
        return {
            "m": self.m,
            "L": self.L,
            "residuals": self.residuals,
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "closure": self.closure,
        }


# -- closures: v -> u with int u = m --------------------------------------


def _bracket_root(fun, x0, target, step=1.0, grow=2.0, max_expand=200):
    lo, hi = x0 - step, x0 + step
    for _ in range(max_expand):
        if fun(lo) < target:
            break
        lo -= step
        step *= grow
    else:
        raise StationaryError("could not bracket the mass constraint from below")
    step = 1.0
    for _ in range(max_expand):
        if fun(hi) > target:
            break
        hi += step
        step *= grow
    else:
        raise StationaryError("could not bracket the mass constraint from above")
    return lo, hi


def _exact_closure(g, prim, v, m):
    vol = float(np.sum(g.volumes))

    def mass_of(L):
        try:
            return integrate(g, prim.inverse_f(v + L))
        except OutOfDomainError:
            return math.inf

    L0 = float(prim.eval_f(np.array([m / vol]))[0] - np.dot(g.volumes, v) / vol)
    lo, hi = _bracket_root(mass_of, L0, m)
    L = brentq(lambda x: mass_of(x) - m, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=400)
    u = prim.inverse_f(v + L)
    u *= m / integrate(g, u)
    return u, L


def _march_factors_linear(kin, dv):
    """Cell ratios ``u_j / u_{j-1}`` of the zero-flux march when D and S/s are constant."""
    a = kin.k_S / kin.K_D
    return np.where(dv > 0, 1.0 + a * dv, 1.0 / (1.0 - a * dv))


def _march(kin, u0, dv):
    """Zero discrete flux, cell by cell: ``D_f (u_j - u_{j-1}) = S_up dv_j``."""
    D = lambda s: float(kin.D(np.array([s]))[0])  # noqa: E731
    S = lambda s: float(kin.S(np.array([s]))[0])  # noqa: E731
    u = np.empty(dv.size + 1)
    u[0] = u0
    for j, d in enumerate(dv):
        ui = u[j]
        Di = D(ui)
        if d == 0.0 or ui == 0.0:
            u[j + 1] = ui
            continue
        if d > 0:
            rhs = S(ui) * d
            phi = lambda x: 0.5 * (Di + D(x)) * (x - ui) - rhs  # noqa: E731
            hi = ui + 2.0 * rhs / Di + 1.0
            while phi(hi) < 0:
                hi = 2.0 * hi
            u[j + 1] = brentq(phi, ui, hi, xtol=1e-300, rtol=1e-15)
        else:
            phi = lambda x: 0.5 * (Di + D(x)) * (x - ui) - S(x) * d  # noqa: E731
            u[j + 1] = brentq(phi, 0.0, ui, xtol=1e-300, rtol=1e-15)
    return u


def _flux_closure(g, kin, v, m):
    dv = np.diff(v)
    if kin.mode == "prototype" and kin.alpha == 0.0 and kin.beta == 1.0:
        shape = np.concatenate([[1.0], np.cumprod(_march_factors_linear(kin, dv))])
        u = shape * (m / integrate(g, shape))
        return u
    vol = float(np.sum(g.volumes))
    mass_of = lambda x: integrate(g, _march(kin, math.exp(x), dv))  # noqa: E731
    x0 = math.log(m / vol)
    lo, hi = _bracket_root(mass_of, x0, m)
    x = brentq(lambda s: mass_of(s) - m, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=400)
    u = _march(kin, math.exp(x), dv)
    return u * (m / integrate(g, u))


def zero_flux_residual(g, kin, u, v) -> float:
    """sup over faces of ``|-D_f u_r + S_up v_r|`` as the simulator discretizes it."""
    du, dv = gradient_faces(g, u), gradient_faces(g, v)
    s_up = upwind_faces(g, kin.S(np.maximum(u, 0.0)), dv)
    flux = -face_average(kin.D(np.maximum(u, 0.0))) * du + s_up * dv
    return float(np.max(np.abs(flux)))


# -- driver --------------------------------------------------------------------


def _residuals(g, kin, prim, sol_u, v, w, L, closure):
    pos = sol_u > 0
    f_dev = prim.eval_f(sol_u[pos]) - v[pos]
    res = {
        "v_eq": float(np.max(np.abs(-laplacian(g, v) + v - w))),
        "w_eq": float(np.max(np.abs(-laplacian(g, w) + w - sol_u))),
        "flux": zero_flux_residual(g, kin, sol_u, v),
    }
    if closure == "exact":
        res["f_minus_v"] = float(np.max(np.abs(f_dev - L))) if f_dev.size else 0.0
    else:
        res["f_minus_v"] = float(np.ptp(f_dev)) if f_dev.size else 0.0
    return res


def solve_stationary(g: RadialGrid, kin, m: float, guess=None, tol=1e-10, max_iter=2000,
                     damping=0.5, closure="exact", s0=DEFAULT_S0, newton=True,
                     newton_switch=1e-6, max_newton=30) -> StationarySolution:
    """Damped fixed-point iteration in ``v`` under the mass constraint.

    Converged means ``sup |v_new - v| <= tol``.  The damping factor is halved
    whenever that update norm grows.  With ``newton=True`` the damped phase
    hands over to Newton's method on ``T(v) - v`` (finite-difference
    Jacobian) once the update drops below ``newton_switch`` or stalls; this
    removes the slow linear tail near bifurcation points.  A non-converged
    run returns the best iterate with ``converged=False``.
    """
    if not m > 0:
        raise ValueError("m must be positive")
    if closure not in CLOSURES:
        raise ValueError(f"closure must be one of {CLOSURES}")
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    prim = kin.primitives(s0)
    vol = float(np.sum(g.volumes))
    v = g.full(m / vol) if guess is None else np.array(guess, dtype=float)
    if v.shape != (g.N,):
        raise ValueError("guess must be a cell field")

    def T(vv):
        if closure == "exact":
            uu, LL = _exact_closure(g, prim, vv, m)
        else:
            uu, LL = _flux_closure(g, kin, vv, m), float("nan")
        ww = helmholtz_solve(g, uu)
        return uu, LL, ww, helmholtz_solve(g, ww)

    history = []
    best = None

    def consider(vv, out):
        nonlocal best
        diff = float(np.max(np.abs(out[3] - vv)))
        history.append(diff)
        if best is None or diff < best[0]:
            best = (diff, vv, out)
        return diff

    lam = damping
    prev = math.inf
    since_best = 0
    for _ in range(max_iter):
        out = T(v)
        diff = consider(v, out)
        if diff <= tol or (newton and diff <= newton_switch):
            break
        since_best = 0 if diff <= best[0] else since_best + 1
        if newton and since_best > 100:
            break
        if diff > prev:
            lam = max(0.5 * lam, 1e-6)
        prev = diff
        v = (1.0 - lam) * v + lam * out[3]

    if newton and best[0] > 1e-3 * tol:
        _newton(T, consider, best, max_newton, 1e-3 * tol, lambda: best)

    diff, _, (u, L, w, v) = best
    converged = diff <= tol
    if closure == "flux":
        pos = u > 0
        L = float(np.median(prim.eval_f(u[pos]) - v[pos])) if np.any(pos) else float("nan")
    res = _residuals(g, kin, prim, u, v, w, L, closure)
    return StationarySolution(g, u, v, w, float(L), float(m), res, len(history), converged,
                              closure, history)


def _newton(T, consider, start, max_newton, target, current):
    diff, v, out = start
    n = v.size
    for _ in range(max_newton):
        r = out[3] - v
        J = np.empty((n, n))
        for j in range(n):
            h = 1e-7 * max(1.0, abs(v[j]))
            vp = v.copy()
            vp[j] += h
            J[:, j] = (T(vp)[3] - out[3]) / h
        J[np.diag_indices(n)] -= 1.0
        try:
            delta = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            return
        step = 1.0
        for _ in range(12):
            trial = v + step * delta
            try:
                t_out = T(trial)
            except (StationaryError, OutOfDomainError, ValueError):
                step *= 0.5
                continue
            t_diff = consider(trial, t_out)
            if t_diff < diff:
                v, out, diff = trial, t_out, t_diff
                break
            step *= 0.5
        else:
            return
        if diff <= target:
            return


def stationary_energy(sol: StationarySolution, kin, s0=DEFAULT_S0, check_tol=1e-8):
    """``int G(u) - 1/2 int uv`` together with the full energy of the same state.

    Returns ``(reduced, full)``; raises if they differ by more than
    ``check_tol`` relative (scaled by ``max(1, |reduced|)``).
    """
    g = sol.grid
    reduced = integrate(g, eval_G(kin, sol.u, s0)) - 0.5 * integrate(g, sol.u * sol.v)
    full = energy(sol.state(), kin, s0)
    if abs(reduced - full) > check_tol * max(1.0, abs(reduced)):
        raise StationaryError(f"stationary energy formulas disagree: {reduced!r} vs {full!r}")
    return reduced, full


def default_guesses(g: RadialGrid, m: float):
    vol = float(np.sum(g.volumes))
    c = m / vol
    r = g.centers
    bump = np.exp(-((r / (0.3 * g.R)) ** 2))
    bump -= np.dot(g.volumes, bump) / vol
    return [g.full(c), c * (1.0 + 0.01 * bump / np.max(np.abs(bump))), c * (1.0 + 0.9 * bump / np.max(np.abs(bump)))]


@dataclass
class ScanResult:
    rows: list
    c2: float
    c0: float
    r2: float

    def envelope(self, m, inflate=1.1):
        """Lower envelope ``-C m^2 - C`` with ``C`` inflated from the fit."""
        C = inflate * max(abs(self.c2), abs(self.c0))
        return -C * np.asarray(m) ** 2 - C


def lower_bound_scan(g: RadialGrid, kin, masses, guesses=None, s0=DEFAULT_S0, **solve_kw) -> ScanResult:
    """Minimum stationary energy found per mass and a fit ``c2 m^2 + c0``.

    ``guesses`` maps a mass to a list of initial ``v`` fields; by default a
    constant, a slightly perturbed and a strongly perturbed profile are used.
    Only converged solutions count.
    """
    rows = []
    for m in masses:
        gl = guesses(m) if callable(guesses) else (guesses or {}).get(m) or default_guesses(g, m)
        energies = []
        for gv in gl:
            sol = solve_stationary(g, kin, m, guess=gv, **solve_kw)
            if sol.converged:
                energies.append(stationary_energy(sol, kin, s0)[0])
        rows.append({"m": float(m), "min_F": min(energies) if energies else math.nan,
                     "converged": len(energies), "tried": len(gl)})
    ok = [r for r in rows if math.isfinite(r["min_F"])]
    if len(ok) >= 2:
        ms = np.array([r["m"] for r in ok])
        Fs = np.array([r["min_F"] for r in ok])
        A = np.column_stack([ms**2, np.ones_like(ms)])
        (c2, c0), *_ = np.linalg.lstsq(A, Fs, rcond=None)
        fit = A @ np.array([c2, c0])
        ss = float(np.sum((Fs - Fs.mean()) ** 2))
        r2 = 1.0 - float(np.sum((Fs - fit) ** 2)) / ss if ss > 0 else 1.0
    else:
        c2 = c0 = r2 = math.nan
    return ScanResult(rows, float(c2), float(c0), float(r2))
