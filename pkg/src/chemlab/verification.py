"""Built-in verification suites behind ``chemlab verify``.

Each suite returns flat JSON-ready records carrying at least
``check, n, N, lhs, rhs, rel_residual, pass``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad

from .grid import build_grid, sphere_measure
from .identities import IdentityReport, hardy_rellich_check, pohozaev_check, weighted_identity_check
from .kinetics import ConditionParams, Kinetics, check_blowup_conditions, prototype_verdict

PI = math.pi

# radial profiles on [0, 1] with u_r(1) = 0, smooth at the origin
HARDY_SUITE = {
    "(1-r^2)^2": lambda r: (1 - r**2) ** 2,
    "(1-r^2)^3": lambda r: (1 - r**2) ** 3,
    "r^2(1-r^2)^2": lambda r: r**2 * (1 - r**2) ** 2,
    "cos(pi r)": lambda r: np.cos(PI * r),
    "cos(2 pi r)": lambda r: np.cos(2 * PI * r),
    "cos(3 pi r)": lambda r: np.cos(3 * PI * r),
    "cos(pi r^2)": lambda r: np.cos(PI * r**2),
    "r^6-3r^2": lambda r: r**6 - 3 * r**2,
    "sin(pi r^2/2)": lambda r: np.sin(PI * r**2 / 2),
    "(1-r^2)^2 exp(r^2)": lambda r: (1 - r**2) ** 2 * np.exp(r**2),
}


def hardy_oracle(n=4):
    """Exact ``int |Lap u|^2`` and ``4 int |grad u|^2/|x|^2`` for ``u = (1-r^2)^2`` on B_1."""
    om = sphere_measure(n)
    ur = lambda r: -4 * r * (1 - r * r)  # noqa: E731
    urr = lambda r: -4 + 12 * r * r  # noqa: E731
    lap = lambda r: urr(r) + (n - 1) / r * ur(r)  # noqa: E731
    lhs = om * quad(lambda r: lap(r) ** 2 * r ** (n - 1), 0, 1, epsabs=0, epsrel=1e-13)[0]
    rhs = 4 * om * quad(lambda r: ur(r) ** 2 * r ** (n - 3), 0, 1, epsabs=0, epsrel=1e-13)[0]
    return lhs, rhs


def hardy_suite(N=4096, tol=1e-6):
    g = build_grid(4, 1.0, N)
    out = []
    for name, fn in HARDY_SUITE.items():
        rep = hardy_rellich_check(g, fn(g.centers), tol=tol)
        out.append(rep.record() | {"function": name})
    return out


def hardy_oracle_match(N=65536):
    """Discrete sides at ``N`` against the quadrature oracle (relative errors)."""
    g = build_grid(4, 1.0, N)
    rep = hardy_rellich_check(g, HARDY_SUITE["(1-r^2)^2"](g.centers))
    lhs, rhs = hardy_oracle()
    return rep, lhs, rhs, abs(rep.lhs - lhs) / abs(lhs), abs(rep.rhs - rhs) / abs(rhs)


def pohozaev_exact(n, R=1.0):
    """Both sides for ``v = (R^2 - r^2)^2`` by adaptive quadrature of exact derivatives."""
    om = sphere_measure(n)
    vr = lambda r: -4 * r * (R * R - r * r)  # noqa: E731
    vrr = lambda r: -4 * R * R + 12 * r * r  # noqa: E731
    lap = lambda r: vrr(r) + (n - 1) / r * vr(r)  # noqa: E731
    # Lap v = -4n R^2 + 4(n+2) r^2, so Lap^2 v = 8 n (n+2)
    bilap = 8.0 * n * (n + 2)
    lhs = -om * quad(lambda r: bilap * r * vr(r) * r ** (n - 1), 0, R, epsabs=0, epsrel=1e-13)[0]
    rhs = 0.5 * (n - 4) * om * quad(lambda r: lap(r) ** 2 * r ** (n - 1), 0, R, epsabs=0, epsrel=1e-13)[0]
    rhs += 0.5 * om * R**n * vrr(R) ** 2
    return lhs, rhs


def pohozaev_suite(n_values=(5, 4), N=2048, tol=1e-6):
    out = []
    for n in n_values:
        g = build_grid(n, 1.0, N)
        rep = pohozaev_check(g, (1 - g.centers**2) ** 2, tol=tol)
        exact, _ = pohozaev_exact(n)
        out.append(rep.record() | {"exact": exact})
    return out


def pohozaev_order(n=5, Ns=(256, 512, 1024, 2048)):
    """Observed order of the relative residual under N -> 2N."""
    res = []
    for N in Ns:
        g = build_grid(n, 1.0, N)
        res.append(pohozaev_check(g, (1 - g.centers**2) ** 2).rel_residual)
    slopes = np.diff(np.log(res)) / np.diff(np.log(Ns))
    return -float(np.mean(slopes)), res


# nonconstant n = 4 stationary state used for the weighted check
WEIGHTED_CASE = {"alpha": 0.2, "beta": 0.5, "R": 4.0, "c": 12.0, "N": 256}


def weighted_suite(eta=0.1, tol=1e-10, resolutions=(1, 2)):
    from .stationary import default_guesses, solve_stationary

    cs = WEIGHTED_CASE
    kin = Kinetics(cs["alpha"], cs["beta"])
    out = []
    for k in resolutions:
        g = build_grid(4, cs["R"], cs["N"] * k)
        m = cs["c"] * float(np.sum(g.volumes))
        sol = solve_stationary(g, kin, m, guess=default_guesses(g, m)[2], tol=tol)
        rec = {"check": "weighted", "n": 4, "N": g.N, "converged": sol.converged}
        try:
            rep = weighted_identity_check(g, sol, eta, kin)
        except ValueError as exc:
            rec.update(lhs=math.nan, rhs=math.nan, rel_residual=math.nan, error=str(exc))
            rec["pass"] = False
        else:
            rec = rep.record() | {"u_min": float(sol.u.min()), "u_max": float(sol.u.max())}
        out.append(rec)
    return out


def conditions_suite(dims=(4, 5, 6), alphas=None, betas=None, band=0.05):
    """Sampled condition verdicts against the sign of ``alpha + beta - 4/n``."""
    alphas = np.round(np.arange(0.0, 1.61, 0.2), 3) if alphas is None else alphas
    betas = np.round(np.arange(0.1, 1.01, 0.3), 3) if betas is None else betas
    out = []
    for n in dims:
        for a in alphas:
            for b in betas:
                gap = a + b - 4.0 / n
                if abs(gap) < band:
                    continue
                rep = check_blowup_conditions(Kinetics(a, b), ConditionParams(n=n))
                expected = gap > 0
                out.append({
                    "check": "conditions", "n": n, "N": None, "alpha": float(a), "beta": float(b),
                    "lhs": float(rep.satisfiable), "rhs": float(expected), "rel_residual": 0.0,
                    "pass": rep.satisfiable == expected,
                    "closed_form": prototype_verdict(a, b, n)["satisfiable"],
                })
    return out


SUITES = {
    "hardy": lambda: hardy_suite() + [_oracle_record()],
    "pohozaev": lambda: pohozaev_suite() + [_order_record()],
    "weighted": weighted_suite,
    "conditions": conditions_suite,
}


def _oracle_record():
    rep, lhs, rhs, el, er = hardy_oracle_match()
    return {"check": "hardy_oracle", "n": 4, "N": rep.N, "lhs": rep.lhs, "rhs": rep.rhs,
            "oracle_lhs": lhs, "oracle_rhs": rhs, "rel_residual": max(el, er), "pass": max(el, er) <= 1e-8}


def _order_record():
    order, res = pohozaev_order()
    return {"check": "pohozaev_order", "n": 5, "N": 2048, "lhs": order, "rhs": 1.7,
            "rel_residual": res[-1], "pass": order >= 1.7}


__all__ = [
    "HARDY_SUITE",
    "IdentityReport",
    "SUITES",
    "conditions_suite",
    "hardy_oracle",
    "hardy_oracle_match",
    "hardy_suite",
    "pohozaev_exact",
    "pohozaev_order",
    "pohozaev_suite",
    "weighted_suite",
]
