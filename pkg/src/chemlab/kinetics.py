"""Diffusivity/sensitivity pairs and the scalar primitives built from D/S.

The primitives are

* ``f(s) = int_{s0}^s D/S``           (increasing, diverges to -inf at 0+)
* ``G(s) = int_{s0}^s f``             (convex, G(s0) = 0, G >= 0)
* ``H(s) = int_{s0}^s sigma D/S``     for s >= s0, and 0 below s0.

All three are tabulated once per ``(kinetics, s0)`` on a uniform grid in
``x = ln s`` and evaluated by cubic Hermite interpolation with exact nodal
slopes.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .quadrature import ATOL, GL5_NODES, GL5_WEIGHTS, RTOL, QuadratureError, adaptive_simpson

__all__ = [
    "Kinetics",
    "OutOfDomainError",
    "CumulativeTable",
    "Primitives",
    "ConditionParams",
    "ConditionCheck",
    "ConditionReport",
    "eval_D",
    "eval_S",
    "eval_f",
    "eval_G",
    "eval_H",
    "check_blowup_conditions",
    "prototype_verdict",
    "QuadratureError",
]

DEFAULT_S0 = 2.0
NODES_PER_DECADE = 4096
S_LO = 1e-12
S_HI = 1e20


class OutOfDomainError(ValueError):
    """A kinetics query fell outside the tabulated range."""


class Kinetics:
    """A diffusivity/sensitivity pair ``(D, S)``.

    ``mode="prototype"`` uses ``D(s) = K_D (s+1)^-alpha`` and
    ``S(s) = k_S (s+1)^(beta-1) s``.  ``mode="tabulated"`` interpolates
    user-supplied samples (monotone cubic in log-log coordinates); below the
    first sample ``D`` is held constant and ``S`` continued linearly to
    ``S(0) = 0``, above the last sample queries raise :class:`OutOfDomainError`.

    ``k_D`` and ``M`` describe the algebraic decay floor
    ``D(s) >= k_D (1+s)^-M``, which is verified on construction.
    """

    def __init__(
        self,
        alpha=0.0,
        beta=1.0,
        K_D=1.0,
        k_S=1.0,
        k_D=None,
        M=None,
        mode="prototype",
        table=None,
        s_hi=S_HI,
    ):
        if mode not in ("prototype", "tabulated"):
            raise ValueError(f"unknown kinetics mode {mode!r}")
        if K_D <= 0 or k_S <= 0:
            raise ValueError("K_D and k_S must be positive")
        self.mode = mode
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.K_D = float(K_D)
        self.k_S = float(k_S)
        self.s_hi = float(s_hi)
        self._tables: dict[float, Primitives] = {}
        self._lock = threading.Lock()

        if mode == "tabulated":
            if table is None:
                raise ValueError("tabulated kinetics need a (s, D, S) table")
            s_tab, d_tab, s_vals = (np.asarray(t, dtype=float) for t in table)
            if s_tab.ndim != 1 or not (s_tab.size == d_tab.size == s_vals.size) or s_tab.size < 4:
                raise ValueError("table arrays must be 1-D, equally sized, with at least 4 samples")
            if np.any(s_tab <= 0) or np.any(np.diff(s_tab) <= 0):
                raise ValueError("table abscissae must be positive and increasing")
            if np.any(d_tab <= 0):
                raise ValueError("D must be positive (D > 0 on [0, inf))")
            if np.any(s_vals <= 0):
                raise ValueError("S must be positive for s > 0")
            self._s_tab = s_tab
            self._d_tab = d_tab
            self._S_tab = s_vals
            self._logD = PchipInterpolator(np.log(s_tab), np.log(d_tab), extrapolate=False)
            self._logS = PchipInterpolator(np.log(s_tab), np.log(s_vals), extrapolate=False)
            self.s_hi = min(self.s_hi, float(s_tab[-1]))

        self.k_D = float(self.K_D if k_D is None else k_D)
        if M is None:
            M = self.alpha if mode == "prototype" else self._fit_decay_exponent()
        self.M = float(M)
        self._check_hypotheses()

    # -- point evaluations -------------------------------------------------

    def D(self, s):
        s = np.asarray(s, dtype=float)
        self._check_domain(s)
        if self.mode == "prototype":
            return self.K_D * (s + 1.0) ** (-self.alpha)
        out = np.empty_like(s)
        low = s < self._s_tab[0]
        out[low] = self._d_tab[0]
        out[~low] = np.exp(self._logD(np.log(s[~low])))
        return out

    def S(self, s):
        s = np.asarray(s, dtype=float)
        self._check_domain(s)
        if self.mode == "prototype":
            return self.k_S * (s + 1.0) ** (self.beta - 1.0) * s
        out = np.empty_like(s)
        low = s < self._s_tab[0]
        out[low] = self._S_tab[0] * s[low] / self._s_tab[0]
        out[~low] = np.exp(self._logS(np.log(s[~low])))
        return out

    def ratio_times_s(self, s):
        """``s * D(s) / S(s)``, finite down to ``s = 0``."""
        s = np.asarray(s, dtype=float)
        if self.mode == "prototype":
            return (self.K_D / self.k_S) * (s + 1.0) ** (1.0 - self.alpha - self.beta)
        out = np.empty_like(s)
        low = s < self._s_tab[0]
        out[low] = self._d_tab[0] * self._s_tab[0] / self._S_tab[0]
        hi = ~low
        out[hi] = s[hi] * np.exp(self._logD(np.log(s[hi])) - self._logS(np.log(s[hi])))
        return out

    def primitives(self, s0=DEFAULT_S0) -> "Primitives":
        """Cached f/G/H tables anchored at ``s0``."""
        key = float(s0)
        with self._lock:
            tab = self._tables.get(key)
            if tab is None:
                tab = Primitives(self.ratio_times_s, key, s_hi=self.s_hi)
                self._tables[key] = tab
        return tab

    def describe(self) -> dict:
        return {
            "mode": self.mode,
            "alpha": self.alpha,
            "beta": self.beta,
            "K_D": self.K_D,
            "k_S": self.k_S,
            "k_D": self.k_D,
            "M": self.M,
        }

    def __repr__(self):
        if self.mode == "prototype":
            return f"Kinetics(alpha={self.alpha}, beta={self.beta}, K_D={self.K_D}, k_S={self.k_S})"
        return f"Kinetics(mode='tabulated', samples={self._s_tab.size})"

    # -- internals ---------------------------------------------------------

    def _check_domain(self, s):
        if np.any(s < 0):
            raise OutOfDomainError("kinetics evaluated at negative density")
        if self.mode == "tabulated" and np.any(s > self._s_tab[-1]):
            raise OutOfDomainError(
                f"density {float(np.max(s)):.3e} beyond table end {self._s_tab[-1]:.3e}"
            )

    def _fit_decay_exponent(self):
        # smallest M with D >= k_D (1+s)^-M on every sample
        ratio = np.log(self.k_D / self._d_tab) / np.log1p(self._s_tab)
        return float(max(0.0, np.max(ratio)))

    def _check_hypotheses(self):
        if self.mode == "tabulated":
            s = self._s_tab
        else:
            s = np.concatenate([[0.0], np.geomspace(1e-8, 1e12, 241)])
        d = self.D(s)
        sv = self.S(s)
        if not np.all(np.isfinite(d)) or np.any(d <= 0):
            raise ValueError("hypothesis violated: D must be positive")
        if self.mode == "prototype" and sv[0] != 0.0:
            raise ValueError("hypothesis violated: S(0) must vanish")
        if np.any(sv[s > 0] <= 0):
            raise ValueError("hypothesis violated: S must be positive for s > 0")
        floor = self.k_D * (1.0 + s) ** (-self.M)
        if np.any(d < floor * (1.0 - 1e-12)):
            worst = float(s[np.argmin(d / floor)])
            raise ValueError(
                f"hypothesis violated: D(s) < k_D (1+s)^-M at s = {worst:.3e}"
            )


class CumulativeTable:
    """Running integral ``F(x) = int_{x0}^x q`` on a uniform grid, plus slopes.

    Values are integrated interval by interval with adaptive Simpson and
    summed outward from the anchor node.  ``slope`` holds ``dF/dx`` at the
    nodes so that evaluation is cubic Hermite.  ``error_bound`` records the
    accumulated quadrature error estimate.
    """

    def __init__(self, x, values, slope, error_bound):
        self.x = x
        self.values = values
        self.slope = slope
        self.error_bound = float(error_bound)
        self.h = float(x[-1] - x[0]) / (x.size - 1)

    @classmethod
    def accumulate(cls, x, anchor, piece, slope, error):
        """Build from per-interval integrals ``piece[j] = int_{x_j}^{x_{j+1}}``."""
        vals = np.zeros_like(x)
        vals[anchor + 1 :] = np.cumsum(piece[anchor:])
        vals[:anchor] = -np.cumsum(piece[:anchor][::-1])[::-1]
        return cls(x, vals, slope, np.sum(error))

    def __call__(self, xq):
        xq = np.asarray(xq, dtype=float)
        t = (xq - self.x[0]) / self.h
        j = np.clip(np.floor(t).astype(np.int64), 0, self.x.size - 2)
        tau = t - j
        h = self.h
        y0, y1 = self.values[j], self.values[j + 1]
        m0, m1 = self.slope[j] * h, self.slope[j + 1] * h
        tau2 = tau * tau
        tau3 = tau2 * tau
        return (
            (2 * tau3 - 3 * tau2 + 1) * y0
            + (tau3 - 2 * tau2 + tau) * m0
            + (-2 * tau3 + 3 * tau2) * y1
            + (tau3 - tau2) * m1
        )


class Primitives:
    """f, G and H tables for one ratio function and anchor ``s0``.

    ``ratio_times_s(s)`` must return ``s * D(s) / S(s)``; integrating in
    ``x = ln s`` turns the ``1/s`` singularity of ``D/S`` at the origin into
    a bounded integrand.
    """

    def __init__(self, ratio_times_s, s0=DEFAULT_S0, s_lo=S_LO, s_hi=S_HI,
                 nodes_per_decade=NODES_PER_DECADE, rtol=RTOL, atol=ATOL):
        if s0 <= 0:
            raise ValueError("s0 must be positive")
        if not s_lo < s0 < s_hi:
            raise ValueError("s0 must lie inside the table range")
        self.s0 = float(s0)
        self.q = ratio_times_s
        h = math.log(10.0) / nodes_per_decade
        x0 = math.log(s0)
        below = int(math.ceil((x0 - math.log(s_lo)) / h))
        above = int(math.ceil((math.log(s_hi) - x0) / h))
        x = x0 + h * np.arange(-below, above + 1)
        self.anchor = below
        self.x = x
        self.s_lo = math.exp(x[0])
        self.s_hi = math.exp(x[-1])

        xl, xr = x[:-1], x[1:]
        q_nodes = self.q(np.exp(x))

        # f: integrand s * (D/S)(s) in x
        def fq(xx, owner):
            return self.q(np.exp(xx))

        f_piece, f_err = adaptive_simpson(fq, xl, xr, rtol, atol)
        self.f = CumulativeTable.accumulate(x, below, f_piece, q_nodes, f_err)

        # H (unclamped): integrand s^2 (D/S)(s) in x
        def hq(xx, owner):
            return self.q(np.exp(xx)) * np.exp(xx)

        h_piece, h_err = adaptive_simpson(hq, xl, xr, rtol, atol)
        self.H_full = CumulativeTable.accumulate(x, below, h_piece, q_nodes * np.exp(x), h_err)

        # G: integrand f(s) * s in x, with f inside an interval from the
        # left node value plus a 5-point Gauss rule over the partial interval
        f_left = self.f.values[:-1]

        def gq(xx, owner):
            a = xl[owner]
            span = xx - a
            acc = np.zeros_like(xx)
            for node, weight in zip(GL5_NODES, GL5_WEIGHTS):
                acc += weight * self.q(np.exp(a + node * span))
            return (f_left[owner] + span * acc) * np.exp(xx)

        g_piece, g_err = adaptive_simpson(gq, xl, xr, rtol, atol)
        self.G = CumulativeTable.accumulate(x, below, g_piece, self.f.values * np.exp(x), g_err)

        self._q_lo = float(q_nodes[0])
        self._f_lo = float(self.f.values[0])
        self._G_lo = float(self.G.values[0])

    # -- evaluation --------------------------------------------------------

    def _split(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s > self.s_hi * (1 + 1e-12)):
            raise OutOfDomainError(
                f"density {float(np.max(s)):.3e} beyond primitive table end {self.s_hi:.3e}"
            )
        if np.any(s < 0):
            raise OutOfDomainError("primitive evaluated at negative density")
        return s, s < self.s_lo

    def eval_f(self, s):
        s, low = self._split(s)
        out = np.empty_like(s)
        hi = ~low
        out[hi] = self.f(np.log(s[hi]))
        sl = s[low]
        with np.errstate(divide="ignore"):
            out[low] = self._f_lo + self._q_lo * np.log(sl / self.s_lo)
        return out

    def eval_G(self, s):
        s, low = self._split(s)
        out = np.empty_like(s)
        hi = ~low
        out[hi] = self.G(np.log(s[hi]))
        sl = s[low]
        # exact integral of the log-linear continuation of f below s_lo
        with np.errstate(divide="ignore", invalid="ignore"):
            slog = np.where(sl > 0, sl * np.log(np.where(sl > 0, sl, 1.0) / self.s_lo), 0.0)
        out[low] = (
            self._G_lo
            + self._f_lo * (sl - self.s_lo)
            + self._q_lo * (slog - sl + self.s_lo)
        )
        return out

    def eval_H(self, s):
        s, low = self._split(s)
        out = np.zeros_like(s)
        active = s >= self.s0
        out[active] = self.H_full(np.log(s[active]))
        return out

    def eval_ratio(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            return self.q(s) / s

    def inverse_f(self, y):
        """Solve ``f(s) = y`` for ``s``; ``y = -inf`` maps to 0.

        Values at or above ``f(s_hi)`` raise :class:`OutOfDomainError`.
        """
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        fv = self.f.values
        if np.any(y >= fv[-1]):
            raise OutOfDomainError("f^{-1} requested beyond the tabulated range of f")
        finite = np.isfinite(y)
        low = finite & (y < fv[0])
        out[low] = self.s_lo * np.exp((y[low] - self._f_lo) / self._q_lo)
        mid = finite & ~low
        if np.any(mid):
            ym = y[mid]
            xg = np.interp(ym, fv, self.x)
            for _ in range(4):
                r = self.f(xg) - ym
                slope = self.q(np.exp(xg))
                xg = np.clip(xg - r / slope, self.x[0], self.x[-1])
            out[mid] = np.exp(xg)
        return out


# -- functional API ---------------------------------------------------------


def eval_D(kin: Kinetics, s):
    return kin.D(s)


def eval_S(kin: Kinetics, s):
    return kin.S(s)


def eval_f(kin, s, s0=None):
    """``int_{s0}^s D/S``; increasing, ``-inf`` at ``s = 0``."""
    return _primitives(kin, s0).eval_f(s)


def eval_G(kin, s, s0=None):
    return _primitives(kin, s0).eval_G(s)


def eval_H(kin, s, s0=None):
    return _primitives(kin, s0).eval_H(s)


def _primitives(kin, s0):
    if isinstance(kin, Primitives):
        if s0 is not None and s0 != kin.s0:
            raise ValueError(f"primitives are anchored at s0={kin.s0}, not {s0}")
        return kin
    return kin.primitives(DEFAULT_S0 if s0 is None else s0)


# -- growth conditions -------------------------------------------------------


@dataclass
class ConditionParams:
    n: int = 5
    s0: float = DEFAULT_S0
    eps: float = 0.5
    K: float = 1.0
    k: float = 1.0
    theta_log: float = 0.5
    gamma: float = 1.0

    def __post_init__(self):
        if self.n < 4:
            raise ValueError("growth conditions are stated for n >= 4")
        if self.s0 <= 1:
            raise ValueError("s0 must exceed 1")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if self.K <= 0 or self.k <= 0:
            raise ValueError("K and k must be positive")
        if self.n == 4 and not 0 < self.theta_log < 1:
            raise ValueError("theta_log must lie in (0, 1) for n = 4")
        if self.n > 4 and self.gamma <= 4.0 / self.n:
            raise ValueError("gamma must exceed 4/n for n > 4")


@dataclass
class ConditionCheck:
    """Sampled verdict for one growth condition.

    ``satisfied_on_samples`` uses the user's constants.  ``satisfiable`` is the
    existence verdict: the smallest constant that makes the inequality hold up
    to ``s`` must stop growing over the last two sampled decades
    (``tail_slope <= slope_tol``).  ``constant`` is that exhibited constant
    and ``exponent`` the companion parameter (eps, gamma or theta).
    """

    name: str
    satisfied_on_samples: bool
    worst_margin: float
    worst_s: float
    satisfiable: bool
    tail_slope: float
    constant: float
    exponent: float


@dataclass
class ConditionReport:
    n: int
    s0: float
    s_max: float
    h_growth: ConditionCheck
    g_growth: ConditionCheck
    asymptotic: dict | None = None

    @property
    def satisfiable(self) -> bool:
        return self.h_growth.satisfiable and self.g_growth.satisfiable

    @property
    def verdict(self) -> bool:
        """Prototype asymptotic verdict when available, sampled otherwise."""
        if self.asymptotic is not None:
            return bool(self.asymptotic["satisfiable"])
        return self.satisfiable

    def to_dict(self) -> dict:
        from dataclasses import asdict

        return {
            "n": self.n,
            "s0": self.s0,
            "s_max": self.s_max,
            "h_growth": asdict(self.h_growth),
            "g_growth": asdict(self.g_growth),
            "satisfiable": self.satisfiable,
            "asymptotic": self.asymptotic,
            "verdict": self.verdict,
        }


def prototype_verdict(alpha, beta, n):
    """Exponent comparison for the prototype kinetics.

    With ``a = alpha + beta``: ``G ~ s^(2-a)`` and ``H ~ s^(2-a)`` for a < 1,
    ``G ~ s ln s`` at a = 1, ``G ~ s`` beyond; both conditions hold exactly
    when ``a > 4/n``.
    """
    a = alpha + beta
    g_exp = 2.0 - a if a < 1 else 1.0
    h_exp = max(2.0 - a, 0.0)
    if n == 4:
        h_ok = a > 1.0
        g_ok = a > 1.0
    else:
        h_ok = a > 4.0 / n
        g_ok = a > 4.0 / n
    return {
        "a": a,
        "critical": 4.0 / n,
        "G_exponent": g_exp,
        "G_log_factor": a == 1.0,
        "H_exponent": h_exp,
        "H_log_factor": a == 2.0,
        "h_growth": h_ok,
        "g_growth": g_ok,
        "satisfiable": h_ok and g_ok,
    }


def _tail_slope(s, q, decades=2.0):
    """Log-slope of the running maximum of ``q`` over the last decades."""
    run = np.maximum.accumulate(q)
    if run[-1] <= 0:
        return -np.inf, 0.0
    tail = s >= s[-1] / 10.0**decades
    r = np.maximum(run[tail], run[-1] * 1e-300)
    pos = r > 0
    if np.count_nonzero(pos) < 2:
        return 0.0, float(run[-1])
    slope = np.polyfit(np.log(s[tail][pos]), np.log(r[pos]), 1)[0]
    return float(slope), float(run[-1])


def check_blowup_conditions(kin, cp: ConditionParams, s_samples=400, s_max=1e8,
                            slope_tol=0.02) -> ConditionReport:
    """Sample the two growth conditions on a geometric grid in ``[s0, s_max]``.

    ``kin`` may be a :class:`Kinetics` or a bare :class:`Primitives`.
    """
    if s_max <= cp.s0:
        raise ValueError("s_max must exceed s0")
    prim = _primitives(kin, cp.s0)
    n = cp.n
    s = np.geomspace(cp.s0, s_max, int(s_samples))[1:]
    G = prim.eval_G(s)
    H = prim.eval_H(s)
    ln = np.log(s)

    # user constants
    if n == 4:
        h_rhs = cp.K * s / ln
        g_rhs = cp.k * s * ln**cp.theta_log
    else:
        h_rhs = (n - 4 - cp.eps) / n * G + cp.K * s
        g_rhs = cp.k * s ** (2.0 - cp.gamma)
    h_margin = (h_rhs - H) / np.abs(h_rhs)
    g_margin = (g_rhs - G) / np.abs(g_rhs)

    # existence search: smallest constants, best companion exponent
    if n == 4:
        h_cands = [(None, H * ln / s)]
        thetas = sorted({cp.theta_log, 0.5, 0.9, 0.99})
        g_cands = [(th, G / (s * ln**th)) for th in thetas]
    else:
        epss = sorted({cp.eps, 0.1, 0.01})
        h_cands = [(e, (H - (n - 4 - e) / n * G) / s) for e in epss]
        crit = 4.0 / n
        gammas = sorted(gm for gm in {cp.gamma, crit + 1e-3, 0.5 * (crit + 1.0), 1.0} if gm > crit)
        g_cands = [(gm, G / s ** (2.0 - gm)) for gm in gammas]

    def best(cands):
        out = None
        for par, q in cands:
            slope, const = _tail_slope(s, q)
            if out is None or slope < out[0]:
                out = (slope, const, par)
        return out

    hs, hc, hp = best(h_cands)
    gs, gc, gp = best(g_cands)

    def mk(name, margin, slope, const, par):
        i = int(np.argmin(margin))
        return ConditionCheck(
            name=name,
            satisfied_on_samples=bool(np.all(margin >= 0)),
            worst_margin=float(margin[i]),
            worst_s=float(s[i]),
            satisfiable=bool(slope <= slope_tol),
            tail_slope=float(slope) if np.isfinite(slope) else -1.0,
            constant=max(const, 0.0) * 1.0001 + 1e-12,
            exponent=float("nan") if par is None else float(par),
        )

    asym = None
    if getattr(kin, "mode", None) == "prototype":
        asym = prototype_verdict(kin.alpha, kin.beta, n)
    return ConditionReport(
        n=n,
        s0=cp.s0,
        s_max=float(s_max),
        h_growth=mk("h_growth", h_margin, hs, hc, hp),
        g_growth=mk("g_growth", g_margin, gs, gc, gp),
        asymptotic=asym,
    )
