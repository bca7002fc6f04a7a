"""Command-line entry point: ``molrelay {run,preset,optimize,validate}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from ..channel import observation_kernel
from ..optimizer import NA_RANGE, XI_RANGE, average_optimal, brute_force_link, round_half_away
from .config import ConfigError, load_config
from .presets import figure_preset, preset_names
from .runner import build_scenario, emit_results, run_experiment
from .validate import run_checks

OUT_ENV = "MOLRELAY_OUT"


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="base seed (overrides the config)")
    p.add_argument("--trials", type=int, help="simulation trials per grid point")
    p.add_argument("--engine", choices=("analytical", "sim", "both"))
    p.add_argument("--out", help=f"output directory (default: config, or ${OUT_ENV})")
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("--timing", action="store_true",
                   help="write wall-clock seconds into the tables (breaks byte-identity)")


def _apply(spec, args):
    changes = {}
    for attr in ("seed", "trials", "engine", "workers"):
        v = getattr(args, attr)
        if v is not None:
            changes[attr] = v
    out = args.out or os.environ.get(OUT_ENV)
    if out:
        changes["out"] = out
    return replace(spec, **changes)


def _execute(spec, args) -> int:
    rows = run_experiment(spec)
    files = emit_results(rows, spec.out, spec, record_time=args.timing)
    for r in rows:
        tag = f"[{r.series}] " if r.series else ""
        ana = "-" if r.analytical_err is None else f"{r.analytical_err:.4g}"
        sim = "-" if r.sim_err is None else f"{r.sim_err:.4g} +- {r.sim_se:.2g}"
        print(f"{tag}{r.sweep_var}={r.value:g}  analytical {ana}  sim {sim}  {r.status}")
    for f in files:
        print(f"wrote {f}")
    return 0 if all(r.status == "ok" for r in rows) else 1


def _optimize(args) -> int:
    spec = load_config(args.config)
    sc = build_scenario(spec, spec.grid[0])
    if sc.q < 0 or len(sc.topology.nodes) < 2:
        raise ConfigError("q: need a link to optimize")
    sums = observation_kernel(sc.topology, sc.timing, 0, 1, sc.schedule.K).sums
    n_a = sc.protocol.n_molecules[0]
    print(f"link 0 -> 1 at {sc.topology.distance(0, 1) * 1e9:.1f} nm, "
          f"T={sc.timing.T * 1e6:g} us, M={sc.timing.M}")
    if args.parameter == "xi":
        avg = average_optimal("xi", sums, n_a, sc.length, sc.p1)
        print(f"N_A = {n_a:g}: average optimal xi {avg:.3f} -> {max(1, round_half_away(avg))}")
        grid = np.arange(XI_RANGE[0], XI_RANGE[1] + 1)
        best, err = brute_force_link("xi", grid, sums, n_a, sc.length, sc.p1)
    else:
        xi = sc.protocol.xi
        avg = average_optimal("na", sums, xi, sc.length, sc.p1)
        print(f"xi = {xi:g}: average optimal N_A {avg:.1f} -> {round_half_away(avg)}")
        grid = np.unique(np.round(NA_RANGE[0] * 1.01 ** np.arange(0, 626))).clip(*NA_RANGE)
        best, err = brute_force_link("na", grid, sums, xi, sc.length, sc.p1)
    print(f"grid search on the expected link error: {best:g} (error {err:.4g})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="molrelay",
                                 description="Multi-hop diffusive molecular relaying experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run a config file")
    p.add_argument("config")
    _common(p)
    p = sub.add_parser("preset", help="run a named preset")
    p.add_argument("name", help=", ".join(preset_names()))
    p.add_argument("--fidelity", action="store_true", help="tenfold trials and realizations")
    _common(p)
    p = sub.add_parser("optimize", help="closed-form optimum of one link")
    p.add_argument("parameter", choices=("na", "xi"))
    p.add_argument("config")
    sub.add_parser("validate", help="run the invariant checks")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return _execute(_apply(load_config(args.config), args), args)
        if args.command == "preset":
            return _execute(_apply(figure_preset(args.name, args.fidelity), args), args)
        if args.command == "optimize":
            return _optimize(args)
        return 0 if run_checks() else 1
    except (ConfigError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
