"""Run a sweep with the analytical engine, the simulator, or both, and persist it."""

from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .. import __version__
from ..analysis import expected_network_error
from ..channel import observation_kernel
from ..model import Scenario, make_scenario
from ..optimizer import average_optimal, brute_force_opt, round_half_away
from ..simulator import ErrorEstimate, simulate_errors
from .config import BASELINE, ExperimentSpec, to_text

log = logging.getLogger(__name__)

HEADER = ("sweep_var", "value", "analytical_err", "sim_err", "sim_se", "trials", "wall_s")


@dataclass
class ResultRow:
    """One grid point of one curve; missing engines or failures leave errors as None."""

    sweep_var: str
    value: float
    analytical_err: float | None = None
    sim_err: float | None = None
    sim_se: float | None = None
    trials: int = 0
    wall_s: float = 0.0
    series: str = ""
    xi: float | None = None
    status: str = "ok"

    def __post_init__(self):
        for name in ("analytical_err", "sim_err"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


def with_xi(scenario: Scenario, xi: float) -> Scenario:
    return replace(scenario, protocol=replace(scenario.protocol, xi=float(xi)))


def build_scenario(spec: ExperimentSpec, value: float) -> Scenario:
    """Scenario of one grid point; ``baseline`` and Q = 0 are the direct link."""
    q, xi, n_total, T = spec.q, spec.xi, spec.n_total, spec.T
    var = spec.sweep_var
    if var == "xi":
        xi = float(value)
    elif var == "na":
        n_total = float(value)
    elif var == "q":
        q = int(value)
    else:
        T = float(value)
    protocol = spec.protocol
    if protocol == BASELINE or q == 0:
        q, protocol = 0, "FD"
    return make_scenario(spec.scheme, protocol, q, x_d=spec.x_d, T=T, M=spec.M, t0=spec.t0,
                         xi=xi, n_total=n_total, split_budget=spec.split_budget,
                         length=spec.length, p1=spec.p1, radius=spec.radius,
                         diffusion=spec.diffusion)


def analytical_error(spec: ExperimentSpec, scenario: Scenario) -> float:
    err, _ = expected_network_error(scenario, spec.realizations, spec.seed,
                                    alignment=spec.alignment)
    return err


def choose_xi(spec: ExperimentSpec, scenario: Scenario) -> float:
    """Fixed threshold part for a grid point according to ``xi_mode``.

    ``average`` is the closed-form average optimum of the first hop,
    ``search`` the analytical network error minimized over ``xi_search``.
    """
    if spec.sweep_var == "xi" or spec.xi_mode == "fixed":
        return float(scenario.protocol.xi)
    if spec.xi_mode == "average":
        sums = observation_kernel(scenario.topology, scenario.timing, 0, 1,
                                  scenario.schedule.K).sums
        n_a = scenario.protocol.n_molecules[0]
        return float(max(1, round_half_away(average_optimal("xi", sums, n_a, scenario.length,
                                                            scenario.p1))))
    lo, hi = spec.xi_search
    best, _ = brute_force_opt(
        lambda g: [analytical_error(spec, with_xi(scenario, x)) for x in g], np.arange(lo, hi + 1))
    return float(best)


def _analytical_job(args):
    spec, label, value = args
    t = time.perf_counter()
    try:
        sc = build_scenario(spec, value)
        xi = choose_xi(spec, sc)
        err = analytical_error(spec, with_xi(sc, xi)) if spec.engine != "sim" else None
        status = "ok"
    except Exception as exc:  # a failing grid point must not stop the sweep
        log.warning("analytical engine failed at %s=%s (%s): %s", spec.sweep_var, value, label, exc)
        xi, err, status = None, None, "failed"
    return ResultRow(spec.sweep_var, float(value), err, series=label, xi=xi,
                     wall_s=time.perf_counter() - t, status=status)


def _estimate(spec: ExperimentSpec, errors, k: int) -> ErrorEstimate:
    return ErrorEstimate(spec.trials, int(errors[k]), spec.trials * spec.length)


def _simulate(spec: ExperimentSpec, rows: list[ResultRow]) -> None:
    """Fill the simulation columns of one curve in place."""
    live = [r for r in rows if r.status == "ok"]
    if spec.sweep_var == "xi" and spec.sim_engine == "radial" and live:
        # one pass of trials replayed for every threshold on common molecules
        t = time.perf_counter()
        sc = build_scenario(spec, live[0].value)
        try:
            totals = simulate_errors(sc, spec.trials, spec.seed, [r.xi for r in live],
                                     spec.sim_engine, spec.workers, spec.alignment)
        except Exception as exc:
            log.warning("simulation failed for %s: %s", rows[0].series or spec.name, exc)
            for r in live:
                r.status = "failed"
            return
        share = (time.perf_counter() - t) / len(live)
        for r, tot in zip(live, totals):
            est = _estimate(spec, tot, sc.q + 1)
            r.sim_err, r.sim_se, r.trials = est.rate, est.se, spec.trials
            r.wall_s += share
        return
    for r in live:
        t = time.perf_counter()
        try:
            sc = with_xi(build_scenario(spec, r.value), r.xi)
            tot = simulate_errors(sc, spec.trials, spec.seed, None, spec.sim_engine,
                                  spec.workers, spec.alignment)[0]
        except Exception as exc:
            log.warning("simulation failed at %s=%s: %s", spec.sweep_var, r.value, exc)
            r.status = "failed"
            continue
        est = _estimate(spec, tot, sc.q + 1)
        r.sim_err, r.sim_se, r.trials = est.rate, est.se, spec.trials
        r.wall_s += time.perf_counter() - t


def run_experiment(spec: ExperimentSpec, workers: int | None = None) -> list[ResultRow]:
    """Rows for every series combination and grid point, in declaration order.

    Grid points go to a process pool for the analytical part; simulation
    trials are split into fixed chunks across the same number of workers.
    The output does not depend on the worker count.
    """
    workers = spec.workers if workers is None else int(workers)
    spec = replace(spec, workers=workers)
    curves = spec.variants()
    jobs = [(replace(sub, workers=workers), label, v) for label, sub in curves for v in sub.grid]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_analytical_job, jobs))
    else:
        rows = [_analytical_job(j) for j in jobs]
    if spec.engine != "analytical":
        start = 0
        for label, sub in curves:
            n = len(sub.grid)
            _simulate(replace(sub, workers=workers), rows[start:start + n])
            start += n
    return rows


# ---------------------------------------------------------------- output

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".10g")
    return str(v)


def emit_results(rows: list[ResultRow], path, spec: ExperimentSpec | None = None,
                 record_time: bool = False) -> list[Path]:
    """Write one comma-separated table per curve plus a run manifest.

    ``wall_s`` is left empty unless ``record_time`` is set, so re-running
    the same spec and seed reproduces the tables byte for byte; measured
    times always go to a separate ``.timing.csv`` file.
    """
    if not rows:
        raise ValueError("no result rows to write")
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from None
    name = spec.name if spec is not None else "results"
    groups: dict[str, list[ResultRow]] = {}
    for r in rows:
        groups.setdefault(r.series, []).append(r)
    written = []
    timing = []
    for label, group in groups.items():
        fname = f"{name}_{label}.csv" if label else f"{name}.csv"
        target = out / fname
        try:
            with open(target, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(HEADER)
                for r in group:
                    w.writerow([r.sweep_var, _cell(r.value), _cell(r.analytical_err),
                                _cell(r.sim_err), _cell(r.sim_se), r.trials,
                                _cell(r.wall_s) if record_time else ""])
                    timing.append((fname, r.value, r.wall_s))
        except OSError as exc:
            raise OSError(f"cannot write {target}: {exc}") from None
        written.append(target)
    with open(out / f"{name}.timing.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("table", "value", "wall_s"))
        for fname, value, wall in timing:
            w.writerow((fname, _cell(value), format(wall, ".3f")))
    if spec is not None:
        written.append(write_manifest(spec, rows, out / f"{name}.manifest", written))
    return written


def write_manifest(spec: ExperimentSpec, rows: list[ResultRow], target: Path,
                   tables: list[Path]) -> Path:
    """Config text of the full spec (readable by load_config) with run notes as comments."""
    spec = replace(spec, version=__version__)
    lines = [f"# molrelay run manifest, artifact version {__version__}",
             f"# base seed {spec.seed}; simulation trial t uses the stream (seed, t)"]
    lines += [f"# table {p.name}" for p in tables]
    for r in rows:
        if r.xi is not None and spec.sweep_var != "xi":
            lines.append(f"# threshold {r.series or '-'} {r.sweep_var}={_cell(r.value)} "
                         f"xi={_cell(r.xi)}")
        if r.status != "ok":
            lines.append(f"# failed {r.series or '-'} {r.sweep_var}={_cell(r.value)}")
    text = "\n".join(lines) + "\n" + to_text(spec)
    target.write_text(text, encoding="utf-8")
    return target
