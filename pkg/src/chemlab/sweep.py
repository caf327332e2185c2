"""Single-run execution with on-disk artifacts, and the parallel parameter sweep.

A run writes ``<out>/<run_id>/`` containing ``timeseries.csv``,
``summary.json`` and the plot files.  A sweep appends one row per run to
``<out>/sweep.csv``; rows whose ``run_id`` is already present are skipped,
so an interrupted sweep resumes where it stopped.  Only the parent process
writes ``sweep.csv``.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

from .config import ConfigError, RunConfig, build_problem, from_dict, tomllib
from .diagnostics import fmt, write_timeseries
from .plots import emit_plots
from .simulator import SimulationError, evolve

SWEEP_COLUMNS = (
    "run_id", "n", "alpha", "beta", "eta", "m", "outcome",
    "t_final", "sup_u_final", "F0", "F_final", "min_dt",
)
AXES = {"alpha": "model", "beta": "model", "eta": "init"}


def worker_count(requested=None) -> int:
    env = os.environ.get("CHEMLAB_WORKERS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError("CHEMLAB_WORKERS", f"not an integer: {env!r}") from None
        if n < 1:
            raise ConfigError("CHEMLAB_WORKERS", "must be >= 1")
        return n
    if requested:
        return int(requested)
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def dump_state(path, state) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(("r", "u", "v", "w"))
        for row in zip(state.grid.centers, state.u, state.v, state.w):
            wr.writerow([fmt(x) for x in row])


def execute(cfg: RunConfig, out_root=None):
    """Run ``cfg`` and persist its artifacts; returns ``(result, run_dir)``."""
    run_dir = Path(out_root if out_root is not None else cfg.output.dir) / cfg.run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    prob = build_problem(cfg)
    try:
        res = evolve(prob.state0, prob.kin, prob.controls, stride=cfg.time.stride,
                     p=cfg.output.lp, s0=cfg.model.s0)
    except SimulationError as exc:
        dump_state(run_dir / "last_valid_state.csv", exc.last_state)
        raise
    write_timeseries(run_dir / "timeseries.csv", res.series)
    summary = {"run_id": cfg.run_id, **res.summary(), "config": cfg.to_dict()}
    (run_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    emit_plots(run_dir, emit_svg=cfg.output.emit_svg)
    return res, run_dir


def _row(cfg: RunConfig, res=None, error=None) -> dict:
    row = {
        "run_id": cfg.run_id,
        "n": str(cfg.model.n),
        "alpha": fmt(cfg.model.alpha),
        "beta": fmt(cfg.model.beta),
        "eta": "" if cfg.init.eta is None else fmt(cfg.init.eta),
        "m": fmt(cfg.init.m),
    }
    if error is not None:
        row.update(outcome="error", t_final="", sup_u_final="", F0="", F_final="", min_dt="")
    else:
        s = res.summary()
        row.update(outcome=res.outcome, t_final=fmt(s["t_final"]), sup_u_final=fmt(s["sup_u_final"]),
                   F0=fmt(s["F0"]), F_final=fmt(s["F_final"]),
                   min_dt=fmt(s["min_dt"] if math.isfinite(s["min_dt"]) else 0.0))
    return row


def _run_job(source: dict, out_root: str) -> dict:
    cfg = from_dict(source)
    try:
        res, _ = execute(cfg, out_root)
        return _row(cfg, res)
    except Exception as exc:  # recorded per run; the sweep goes on
        run_dir = Path(out_root) / cfg.run_id
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "error.txt").write_text(f"{type(exc).__name__}: {exc}\n\n{traceback.format_exc()}")
        row = _row(cfg, error=exc)
        row["_message"] = f"{type(exc).__name__}: {exc}"
        return row


@dataclass
class SweepSpec:
    base: RunConfig
    axes: dict
    workers: int | None = None
    out_dir: str | None = None
    configs: list = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.configs)


def parse_sweep(text: str) -> SweepSpec:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<document>", f"not valid TOML ({exc})") from None
    sw = dict(raw.pop("sweep", {}))
    axes = {}
    for name in AXES:
        if name in sw:
            vals = sw.pop(name)
            if not isinstance(vals, list) or not vals:
                raise ConfigError(f"sweep.{name}", "expected a non-empty list")
            axes[name] = vals
    workers = sw.pop("workers", None)
    if workers is not None and (not isinstance(workers, int) or workers < 1):
        raise ConfigError("sweep.workers", "must be a positive integer")
    out_dir = sw.pop("dir", None)
    for key in sw:
        raise ConfigError(f"sweep.{key}", "unknown key")
    configs = []
    names = list(axes)
    for combo in itertools.product(*(axes[k] for k in names)):
        d = {sec: dict(body) for sec, body in raw.items()}
        for name, val in zip(names, combo):
            d.setdefault(AXES[name], {})[name] = val
        configs.append(from_dict(d))
    base = configs[0] if configs else from_dict(raw)
    if not configs:
        configs = [base]
    return SweepSpec(base, axes, workers, out_dir, configs)


def load_sweep(path) -> SweepSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("<file>", str(exc)) from None
    return parse_sweep(text)


def _existing_ids(path: Path) -> set:
    if not path.exists():
        return set()
    with open(path, newline="") as fh:
        return {row["run_id"] for row in csv.DictReader(fh)}


def sweep(spec: SweepSpec, out_dir=None, workers=None, log=None) -> dict:
    """Execute every pending configuration; returns counts of what happened."""
    log = log or (lambda msg: print(msg, file=sys.stderr))
    out = Path(out_dir or spec.out_dir or spec.base.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    table = out / "sweep.csv"
    done = _existing_ids(table)
    seen = set()
    pending = []
    for cfg in spec.configs:
        rid = cfg.run_id
        if rid in done or rid in seen:
            continue
        seen.add(rid)
        pending.append(cfg)
    nworkers = worker_count(workers or spec.workers)
    log(f"sweep: {spec.size} configurations, {spec.size - len(pending)} already done, "
        f"{len(pending)} to run on {nworkers} worker(s)")
    new_file = not table.exists()
    counts = {"total": spec.size, "skipped": spec.size - len(pending), "ran": 0, "errors": 0}
    with open(table, "a", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n", extrasaction="ignore")
        if new_file:
            wr.writeheader()
            fh.flush()

        def record(row):
            wr.writerow(row)
            fh.flush()
            counts["ran"] += 1
            if row["outcome"] == "error":
                counts["errors"] += 1
                log(f"run {row['run_id']} failed: {row.get('_message', '')}")
            else:
                log(f"run {row['run_id']}: {row['outcome']}")

        if nworkers == 1 or len(pending) <= 1:
            for cfg in pending:
                record(_run_job(cfg.source, str(out)))
        else:
            with ProcessPoolExecutor(max_workers=nworkers) as pool:
                futs = [pool.submit(_run_job, cfg.source, str(out)) for cfg in pending]
                for fut in as_completed(futs):
                    record(fut.result())
    return counts


def read_sweep(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def outcome_matrix(rows) -> dict:
    """``{(alpha, beta, eta): outcome}`` from sweep rows."""
    return {(float(r["alpha"]), float(r["beta"]), r["eta"]): r["outcome"] for r in rows}


__all__ = [
    "SWEEP_COLUMNS",
    "SweepSpec",
    "execute",
    "load_sweep",
    "parse_sweep",
    "read_sweep",
    "sweep",
    "worker_count",
    "outcome_matrix",
]
