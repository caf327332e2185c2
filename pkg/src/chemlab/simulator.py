"""Semi-implicit, mass-conservative time stepping for the (u, v, w) system.

One step runs ``w -> v -> u``:

1. ``(1 - dt Lap_h + dt) w' = w + dt u``
2. ``(1 - dt Lap_h + dt) v' = v + dt w'``
3. ``u' = u - dt div F`` with ``F = -D_f grad u' + S_up grad v'``; diffusion
   is implicit with ``D`` frozen at the old ``u``, the drift is explicit and
   upwinded by the sign of ``grad v'``.

Steps producing ``u' < -nonneg_tol`` or a sup-norm jump above ``growth_cap``
are rejected and retried at half the step.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import EnergyReport, dissipation, energy, lp_norm, mass, sup_norm, upwind_faces
from .grid import SolverError, diffusion_bands, face_average, gradient_faces, helmholtz_solve, solve_tridiagonal
from .kinetics import DEFAULT_S0, OutOfDomainError
from .state import State

__all__ = [
    "State",
    "TimeControls",
    "RunResult",
    "StepRejected",
    "SimulationError",
    "step",
    "choose_dt",
    "evolve",
    "run",
]

log = logging.getLogger(__name__)

EPS_U = 1e-12
GROW_AFTER = 5
GROW_FACTOR = 1.25


class StepRejected(RuntimeError):
    pass


class SimulationError(RuntimeError):
    """A run hit non-finite values; ``last_state`` is the last valid state."""

    def __init__(self, message, last_state):
        super().__init__(message)
        self.last_state = last_state


@dataclass(frozen=True)
class TimeControls:
    dt_init: float = 1e-4
    dt_min: float = 1e-12
    dt_max: float = 1e-2
    cfl: float = 0.4
    t_end: float = 5.0
    u_max: float = 1e8
    growth_cap: float = 0.2
    nonneg_tol: float = 1e-13

    def __post_init__(self):
        if not 0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        if not 0 < self.cfl < 1:
            raise ValueError("cfl must lie in (0, 1)")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not self.u_max > 0 or not self.growth_cap > 0 or self.nonneg_tol < 0:
            raise ValueError("u_max, growth_cap must be positive and nonneg_tol >= 0")


@dataclass
class RunResult:
    outcome: str
    state: State
    series: list = field(default_factory=list)
    wall_time: float = 0.0
    steps: int = 0
    rejected: int = 0
    min_dt: float = math.inf
    F0: float = math.nan
    sup_u0: float = math.nan

    @property
    def t_final(self) -> float:
        return self.state.t

    @property
    def F_final(self) -> float:
        return self.series[-1].F if self.series else math.nan

    def summary(self) -> dict:
        return {
            "outcome": self.outcome,
            "t_final": self.t_final,
            "steps": self.steps,
            "rejected": self.rejected,
            "min_dt": self.min_dt,
            "sup_u0": self.sup_u0,
            "sup_u_final": sup_norm(self.state),
            "mass_final": mass(self.state),
            "F0": self.F0,
            "F_final": self.F_final,
            "max_budget_residual": max((r.budget_residual for r in self.series), default=0.0),
            "wall_time": self.wall_time,
        }


def step(state: State, kin, dt: float, nonneg_tol: float = 1e-13) -> State:
    """Advance by ``dt``; raises :class:`StepRejected` on loss of positivity."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    g = state.grid
    u = state.u
    w1 = helmholtz_solve(g, state.w + dt * u, dt)
    v1 = helmholtz_solve(g, state.v + dt * w1, dt)

    dv = gradient_faces(g, v1)
    up = np.maximum(u, 0.0)
    drift = upwind_faces(g, kin.S(up), dv) * dv
    flux = g.areas * drift
    rhs = u - dt * (flux[1:] - flux[:-1]) / g.volumes

    lower, diag, upper = diffusion_bands(g, face_average(kin.D(up)))
    u1 = solve_tridiagonal(dt * lower, 1.0 + dt * diag, dt * upper, rhs)
    if not (np.all(np.isfinite(u1)) and np.all(np.isfinite(v1)) and np.all(np.isfinite(w1))):
        raise StepRejected("non-finite values")
    if u1.min() < -nonneg_tol:
        raise StepRejected(f"negative density {u1.min():.3e}")
    return State(g, state.t + dt, u1, v1, w1)


def cfl_dt(state: State, kin, cfl: float) -> float:
    """``cfl dr / max |S(u)/max(u, eps) v_r|`` over faces (inf if no drift)."""
    g = state.grid
    u = np.maximum(state.u, 0.0)
    speed_cell = kin.S(u) / np.maximum(u, EPS_U)
    dv = gradient_faces(g, state.v)
    speed = np.abs(dv[1:-1]) * np.maximum(speed_cell[1:], speed_cell[:-1])
    vmax = float(speed.max()) if speed.size else 0.0
    return math.inf if vmax == 0.0 else cfl * g.dr / vmax


def choose_dt(state: State, kin, controls: TimeControls, dt_growth: float | None = None) -> float:
    cap = controls.dt_max if dt_growth is None else dt_growth
    return min(controls.dt_max, cfl_dt(state, kin, controls.cfl), cap)


class _Controller:
    """Step-size memory: halve on rejection, grow by 1.25 after 5 clean steps."""

    def __init__(self, controls: TimeControls):
        self.c = controls
        self.dt = controls.dt_init
        self.streak = 0

    def reject(self):
        self.dt *= 0.5
        self.streak = 0

    def accept(self):
        self.streak += 1
        if self.streak >= GROW_AFTER:
            self.dt = min(self.dt * GROW_FACTOR, self.c.dt_max)
            self.streak = 0


def evolve(state0: State, kin, controls: TimeControls, *, stride=10, p=2.0, s0=DEFAULT_S0,
           max_steps=None, on_record=None) -> RunResult:
    """Integrate from ``state0`` and classify the outcome.

    Energy and dissipation are evaluated after every accepted step so the
    recorded budget residual uses the trapezoidal rule on the full step
    sequence; reports are stored every ``stride`` accepted steps and at the end.
    """
    if int(stride) < 1:
        raise ValueError("stride must be >= 1")
    clock = time.perf_counter()
    c = controls
    ctl = _Controller(c)
    state = state0
    if not state.is_valid(c.nonneg_tol):
        raise ValueError("initial state must be finite and nonnegative")
    F0 = energy(state, kin, s0)
    D_prev = dissipation(state, kin)
    sup0 = sup_norm(state)
    Q = 0.0

    def rep(k, dt, F, D):
        r = EnergyReport(k, state.t, dt, mass(state), sup_norm(state), lp_norm(state, 2.0),
                         lp_norm(state, p), F, D, abs(F - F0 + Q),
                         float(state.v.max()), float(state.w.max()))
        if on_record is not None:
            on_record(r)
        return r

    result = RunResult("completed", state, [], F0=F0, sup_u0=sup0)
    result.series.append(rep(0, 0.0, F0, D_prev))
    k = 0
    last_dt = 0.0
    outcome = None
    while outcome is None:
        remaining = c.t_end - state.t
        # rounding leftovers below dt_min count as having reached t_end
        if remaining <= max(c.dt_min, 1e-13 * c.t_end):
            break
        dt = min(choose_dt(state, kin, c, ctl.dt), remaining)
        if dt < c.dt_min:
            outcome = "dt_floor"
            break
        try:
            new = step(state, kin, dt, c.nonneg_tol)
            s_old, s_new = sup_norm(state), sup_norm(new)
            if s_old > 0 and abs(s_new - s_old) > c.growth_cap * s_old and s_new < c.u_max:
                raise StepRejected("sup-norm growth above cap")
            F = energy(new, kin, s0)
            D = dissipation(new, kin)
        except (StepRejected, SolverError) as exc:
            log.debug("t=%.6g dt=%.3e rejected: %s", state.t, dt, exc)
            result.rejected += 1
            ctl.dt = min(ctl.dt, dt)
            ctl.reject()
            if ctl.dt < c.dt_min:
                outcome = "dt_floor"
            continue
        except OutOfDomainError:
            outcome = "blowup_suspected"
            break
        if not (math.isfinite(F) and math.isfinite(D)):
            raise SimulationError(f"non-finite energy at t={new.t}", state)
        if dt < remaining:
            ctl.accept()
        Q += 0.5 * dt * (D + D_prev)
        D_prev = D
        state = new
        k += 1
        last_dt = dt
        result.min_dt = min(result.min_dt, dt)
        record = k % stride == 0
        if sup_norm(state) >= c.u_max:
            outcome = "blowup_suspected"
            record = True
        if record:
            result.series.append(rep(k, dt, F, D))
        if max_steps is not None and k >= max_steps:
            outcome = "completed"
    if result.series[-1].step != k:
        result.series.append(rep(k, last_dt, energy(state, kin, s0), D_prev))
    if outcome is None:
        outcome = "growing" if sup_norm(state) >= 10.0 * sup0 else "completed"
    result.outcome = outcome
    result.state = state
    result.steps = k
    result.wall_time = time.perf_counter() - clock
    return result


def run(config) -> RunResult:
    """Run a validated :class:`chemlab.config.RunConfig`."""
    from .config import build_problem

    prob = build_problem(config)
    t = config.time
    return evolve(
        prob.state0,
        prob.kin,
        prob.controls,
        stride=t.stride,
        p=config.output.lp,
        s0=config.model.s0,
    )
