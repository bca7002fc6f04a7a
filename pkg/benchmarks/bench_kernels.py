"""Compare the compiled and pure-Python molecule trackers.

Both backends consume the same generator stream, so the counts are checked
for equality before timing.  Run with ``python3 benchmarks/bench_kernels.py``.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from molrelay import _fallback, kernels
from molrelay.model import DEFAULT_DIFFUSION, DEFAULT_RADIUS, make_scenario
from molrelay.simulator import run_trial

CASES = {
    # observers at the emitter, one hop and two hops away
    "relay slot": (np.array([0.0, 333e-9, 666e-9]), 3333),
    "far link": (np.array([1e-6]), 20000),
}


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def bench_slot(backend, dist, n_mol, K=53, M=10, seed=1):
    buf = np.zeros((dist.size, K * M), dtype=np.int64)
    rng = np.random.default_rng(seed)
    backend(rng, buf, dist, np.full(dist.size, DEFAULT_RADIUS), n_mol, 0, DEFAULT_DIFFUSION,
            200e-6, 20e-6, M)
    return buf


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)
    if "compiled" not in kernels.BACKENDS:
        print("compiled extension not built; only the Python backend is available")
        return
    fast, slow = kernels.BACKENDS["compiled"], _fallback.radial_counts
    print(f"{'case':<14}{'compiled ms':>14}{'python ms':>12}{'speedup':>10}")
    for name, (dist, n_mol) in CASES.items():
        assert np.array_equal(bench_slot(fast, dist, n_mol), bench_slot(slow, dist, n_mol))
        tc = _time(lambda: bench_slot(fast, dist, n_mol), args.repeats)
        tp = _time(lambda: bench_slot(slow, dist, n_mol), args.repeats)
        print(f"{name:<14}{tc * 1e3:>14.2f}{tp * 1e3:>12.1f}{tp / tc:>10.1f}")

    sc = make_scenario("MM-MH", "FD", 1, x_d=1e-6, T=200e-6, n_total=2e4)
    tc = _time(lambda: run_trial(sc, (0, 0)), args.repeats)
    saved = kernels.radial_counts
    try:
        # the engine resolves the backend at call time through the kernels module
        kernels.radial_counts = slow
        tp = _time(lambda: run_trial(sc, (0, 0)), 1)
    finally:
        kernels.radial_counts = saved
    print(f"{'full trial':<14}{tc * 1e3:>14.2f}{tp * 1e3:>12.1f}{tp / tc:>10.1f}")


if __name__ == "__main__":
    main()
