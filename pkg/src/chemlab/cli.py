"""Command-line entry point: ``chemlab <subcommand> ...``.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, build_problem, load_config
from .diagnostics import energy, fmt
from .grid import integrate, laplacian
from .kinetics import eval_G

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3

STATIONARY_KEYS = {"closure": str, "tol": float, "max_iter": int, "damping": float, "guess": str}
GUESSES = ("constant", "perturbed", "bump")

log = logging.getLogger("chemlab")


def _json(obj) -> str:
    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.bool_):
            return bool(o)
        raise TypeError(type(o).__name__)

    return json.dumps(obj, default=default, sort_keys=True)


def _out_dir(args, cfg) -> Path:
    root = Path(args.out) if args.out else Path(cfg.output.dir)
    d = root / cfg.run_id
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_simulate(args) -> int:
    from .sweep import execute

    cfg = load_config(args.config)
    res, run_dir = execute(cfg, args.out)
    print(_json({"run_id": cfg.run_id, "dir": str(run_dir), **res.summary()}))
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .sweep import load_sweep, sweep

    spec = load_sweep(args.spec)
    counts = sweep(spec, out_dir=args.out, workers=args.workers)
    print(_json(counts))
    return EXIT_OK if counts["errors"] == 0 else EXIT_RUNTIME


def _energy_parts(g, u, v, w, kin, s0):
    vt = laplacian(g, v) - v + w
    return {
        "int_G": integrate(g, eval_G(kin, u, s0)),
        "int_uv": integrate(g, u * v),
        "half_int_vt2": 0.5 * integrate(g, vt**2),
        "half_int_helm2": 0.5 * integrate(g, (v - laplacian(g, v)) ** 2),
    }


def cmd_energy(args) -> int:
    cfg = load_config(args.config)
    prob = build_problem(cfg)
    st = prob.state0
    rec = {
        "run_id": cfg.run_id,
        "F0": energy(st, prob.kin, cfg.model.s0),
        "mass": integrate(st.grid, st.u),
        **_energy_parts(st.grid, st.u, st.v, st.w, prob.kin, cfg.model.s0),
    }
    print(_json(rec))
    return EXIT_OK


def _write_profile(path, r, values, name):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(("r", name))
        for x, y in zip(r, values):
            wr.writerow((fmt(x), fmt(y)))


def cmd_initdata(args) -> int:
    cfg = load_config(args.config)
    prob = build_problem(cfg)
    st = prob.state0
    d = _out_dir(args, cfg)
    for name in ("u", "v", "w"):
        _write_profile(d / f"{name}0.csv", st.grid.centers, getattr(st, name), f"{name}0")
    manifest = {
        "run_id": cfg.run_id,
        "init": cfg.to_dict()["init"],
        "model": cfg.to_dict()["model"],
        "cells": cfg.grid.cells,
        "mass": integrate(st.grid, st.u),
        "F0": energy(st, prob.kin, cfg.model.s0),
    }
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(_json({**manifest, "dir": str(d)}))
    return EXIT_OK


def _stationary_options(cfg):
    raw = dict(cfg.extra.get("stationary", {}))
    opts = {}
    for key, value in raw.items():
        if key not in STATIONARY_KEYS:
            raise ConfigError(f"stationary.{key}", "unknown key")
        typ = STATIONARY_KEYS[key]
        if typ is str and not isinstance(value, str):
            raise ConfigError(f"stationary.{key}", "expected a string")
        if typ is not str and (isinstance(value, bool) or not isinstance(value, (int, float))):
            raise ConfigError(f"stationary.{key}", "expected a number")
        opts[key] = typ(value)
    if opts.get("closure", "exact") not in ("exact", "flux"):
        raise ConfigError("stationary.closure", "must be 'exact' or 'flux'")
    if opts.get("guess", "constant") not in GUESSES:
        raise ConfigError("stationary.guess", f"must be one of {', '.join(GUESSES)}")
    if not opts.get("tol", 1e-10) > 0:
        raise ConfigError("stationary.tol", "must be positive")
    if opts.get("max_iter", 1) < 1:
        raise ConfigError("stationary.max_iter", "must be >= 1")
    if not 0 < opts.get("damping", 0.5) <= 1:
        raise ConfigError("stationary.damping", "must lie in (0, 1]")
    return opts


def cmd_stationary(args) -> int:
    from .grid import build_grid
    from .config import build_kinetics
    from .stationary import default_guesses, solve_stationary, stationary_energy

    cfg = load_config(args.config)
    opts = _stationary_options(cfg)
    g = build_grid(cfg.model.n, cfg.model.R, cfg.grid.cells)
    kin = build_kinetics(cfg.model)
    m = cfg.init.m
    guess = default_guesses(g, m)[GUESSES.index(opts.pop("guess", "constant"))]
    sol = solve_stationary(g, kin, m, guess=guess, s0=cfg.model.s0, **opts)
    F, F_full = stationary_energy(sol, kin, cfg.model.s0, check_tol=math.inf)
    d = _out_dir(args, cfg)
    with open(d / "stationary_profiles.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(("r", "u", "v", "w"))
        for row in zip(g.centers, sol.u, sol.v, sol.w):
            wr.writerow([fmt(x) for x in row])
    rec = {**sol.record(), "F": F, "F_full": F_full, "run_id": cfg.run_id}
    (d / "stationary.json").write_text(_json(rec) + "\n")
    print(_json({**rec, "dir": str(d)}))
    return EXIT_OK if sol.converged else EXIT_RUNTIME


def cmd_verify(args) -> int:
    from .verification import SUITES

    names = list(SUITES) if args.check is None else [args.check]
    ok = True
    for name in names:
        for rec in SUITES[name]():
            ok &= bool(rec["pass"])
            print(_json(rec))
    return EXIT_OK if ok else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chemlab", description="Radial chemotaxis laboratory.")
    p.add_argument("--version", action="version", version=f"chemlab {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one configuration")
    s.add_argument("config")
    s.add_argument("--out", help="output root (default: output.dir)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", help="run the cartesian product of sweep axes")
    s.add_argument("spec")
    s.add_argument("--out", help="output root (default: sweep.dir or output.dir)")
    s.add_argument("--workers", type=int, help="worker processes (CHEMLAB_WORKERS wins)")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("energy", help="initial energy of the configured data")
    s.add_argument("config")
    s.set_defaults(func=cmd_energy)

    s = sub.add_parser("initdata", help="write the initial triple and a manifest")
    s.add_argument("config")
    s.add_argument("--out")
    s.set_defaults(func=cmd_initdata)

    s = sub.add_parser("stationary", help="solve the stationary problem with the configured mass")
    s.add_argument("config")
    s.add_argument("--out")
    s.set_defaults(func=cmd_stationary)

    s = sub.add_parser("verify", help="run built-in identity and condition checks")
    s.add_argument("--check", choices=("hardy", "pohozaev", "weighted", "conditions"))
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 -- any failure past validation is a runtime error
        log.debug("runtime failure", exc_info=True)
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
