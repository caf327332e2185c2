"""Mass, norms, the energy F, its dissipation and the integrated budget.

``v_t`` is never a time difference here: it is the PDE right-hand side
``Lap_h v - v + w`` at a single time slice, so every quantity can be
evaluated on one state (including initial and stationary data).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import astuple, dataclass, fields

import numpy as np

from .grid import RadialGrid, face_average, gradient_faces, integrate, integrate_faces, laplacian
from .kinetics import DEFAULT_S0, eval_G
from .state import State

log = logging.getLogger(__name__)

S_SKIP = 1e-14
S_FLOOR = 1e-300

CSV_COLUMNS = (
    "step", "t", "dt", "mass", "sup_u", "l2_u", "lp_u",
    "F", "Diss", "budget_residual", "sup_v", "sup_w",
)


@dataclass
class EnergyReport:
    step: int
    t: float
    dt: float
    mass: float
    sup_u: float
    l2_u: float
    lp_u: float
    F: float
    Diss: float
    budget_residual: float
    sup_v: float
    sup_w: float

    def row(self) -> list[str]:
        return [str(self.step)] + [fmt(x) for x in astuple(self)[1:]]


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


def mass(state: State) -> float:
    return integrate(state.grid, state.u)


def sup_norm(state: State) -> float:
    return float(np.max(np.abs(state.u)))


def lp_norm(state: State, p: float = 2.0) -> float:
    if p == np.inf:
        return sup_norm(state)
    if p < 1:
        raise ValueError("p must be >= 1")
    return integrate(state.grid, np.abs(state.u) ** p) ** (1.0 / p)


def v_t(g: RadialGrid, v, w):
    return laplacian(g, v) - v + w


def _energy(g: RadialGrid, u, v, w, kin, s0):
    vt = v_t(g, v, w)
    helm = v - laplacian(g, v)
    return (
        integrate(g, eval_G(kin, u, s0))
        - integrate(g, u * v)
        + 0.5 * integrate(g, vt**2)
        + 0.5 * integrate(g, helm**2)
    )


def energy(state: State, kin, s0=DEFAULT_S0) -> float:
    """``int G(u) - int uv + 1/2 int v_t^2 + 1/2 int (-Lap v + v)^2``."""
    return _energy(state.grid, state.u, state.v, state.w, kin, s0)


def energy_initial(g: RadialGrid, u0, v0, w0, kin, s0=DEFAULT_S0) -> float:
    return _energy(g, np.asarray(u0, float), np.asarray(v0, float), np.asarray(w0, float), kin, s0)


def upwind_faces(g: RadialGrid, cell_values, dv):
    """Face values taken from the cell the drift ``S grad v`` comes from."""
    out = np.zeros(g.N + 1)
    out[1:-1] = np.where(dv[1:-1] > 0, cell_values[:-1], cell_values[1:])
    return out


def dissipation(state: State, kin, *, return_skipped=False):
    """``int S |(D/S) grad u - grad v|^2 + 2 int |grad v_t|^2 + 2 int v_t^2``.

    The first integrand is written as ``|D grad u - S grad v|^2 / S`` on
    interior faces, with ``D`` averaged and ``S`` upwinded by the sign of
    ``grad v`` exactly as in the time stepper; faces where ``S`` is below
    ``1e-14`` are skipped.
    """
    g = state.grid
    u, v = state.u, state.v
    du = gradient_faces(g, u)
    dv = gradient_faces(g, v)
    up = np.maximum(u, 0.0)
    Df = face_average(kin.D(up))
    Sf = upwind_faces(g, kin.S(up), dv)
    flux = Df * du - Sf * dv
    ok = Sf >= S_SKIP
    ok[0] = ok[-1] = False
    first = np.zeros_like(flux)
    first[ok] = flux[ok] ** 2 / np.maximum(Sf[ok], S_FLOOR)
    skipped = int(g.N - 1 - np.count_nonzero(ok))
    if skipped:
        log.debug("dissipation: %d degenerate faces skipped", skipped)
    vt = v_t(g, v, state.w)
    total = integrate_faces(g, first) + 2.0 * integrate_faces(g, gradient_faces(g, vt) ** 2) + 2.0 * integrate(g, vt**2)
    return (total, skipped) if return_skipped else total


def report(state: State, kin, *, step=0, dt=0.0, p=2.0, s0=DEFAULT_S0, F=None, Diss=None,
           budget_residual=0.0) -> EnergyReport:
    return EnergyReport(
        step=step,
        t=state.t,
        dt=dt,
        mass=mass(state),
        sup_u=sup_norm(state),
        l2_u=lp_norm(state, 2.0),
        lp_u=lp_norm(state, p),
        F=energy(state, kin, s0) if F is None else F,
        Diss=dissipation(state, kin) if Diss is None else Diss,
        budget_residual=budget_residual,
        sup_v=float(np.max(state.v)),
        sup_w=float(np.max(state.w)),
    )


def budget_residuals(t, F, Diss) -> np.ndarray:
    """``|F_k - F_0 + int_0^{t_k} D|`` with the trapezoidal rule."""
    t, F, Diss = (np.asarray(a, dtype=float) for a in (t, F, Diss))
    Q = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (Diss[1:] + Diss[:-1]))])
    return np.abs(F - F[0] + Q)


def budget_audit(series) -> float:
    if not series:
        return 0.0
    res = budget_residuals([r.t for r in series], [r.F for r in series], [r.Diss for r in series])
    return float(res.max())


def write_timeseries(path, series) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(CSV_COLUMNS)
        for rep in series:
            wr.writerow(rep.row())


def read_timeseries(path) -> list[EnergyReport]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            kw = {f.name: float(row[f.name]) for f in fields(EnergyReport)}
            kw["step"] = int(kw["step"])
            out.append(EnergyReport(**kw))
    return out
