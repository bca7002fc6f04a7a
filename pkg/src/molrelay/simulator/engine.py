"""Monte Carlo decode-and-forward trials and error estimation.

Two molecule engines are available.

``radial`` (default)
    Every emission slot of every node is simulated once per trial with the
    compiled radial tracker and stored as per-interval counts at each
    observer.  A molecule that is outside an observer can only be counted
    again after it hits the observer's sphere, and the hitting time of a
    sphere in free 3-D space is sampled exactly, so the count process of
    each observer is exact.  Each (emission, observer) pair uses its own
    molecules, which drops the weak coupling between counts at different
    observers but keeps every observer's count law intact.  Because slot
    contributions do not depend on any decision, one trial can replay the
    decode-and-forward chain for a whole grid of fixed threshold parts on
    common molecules.
``particle``
    Full 3-D Brownian particles advanced in steps of ``t0``; slow, used to
    cross-check the radial engine on small configurations.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..channel import kernel_tables
from ..detection import make_threshold_rules
from ..model import Scenario, SourceModel, generate_source_bits
from .particles import ParticleStore, brownian_step, release, sample_count

log = logging.getLogger(__name__)

ENGINES = ("radial", "particle")


@dataclass
class TrialResult:
    """Outcome of one trial for each threshold in ``xis``.

    ``detected[g, k]`` holds node k's L decisions (row 0 is the source
    sequence); ``node_errors[g, k]`` counts node k's disagreements with the
    source.
    """

    seed: tuple
    source: np.ndarray
    xis: np.ndarray
    detected: np.ndarray
    node_errors: np.ndarray

    @property
    def errors(self) -> np.ndarray:
        return self.node_errors[:, -1]


@dataclass(frozen=True)
class ErrorEstimate:
    trials: int
    errors: int
    n_bits: int

    @property
    def rate(self) -> float:
        return self.errors / self.n_bits if self.n_bits else float("nan")

    @property
    def se(self) -> float:
        p = self.rate
        return math.sqrt(p * (1.0 - p) / self.n_bits) if self.n_bits else float("nan")


def trial_rng(base_seed: int, trial: int) -> np.random.Generator:
    """Independent stream per trial, derived only from (base seed, trial index)."""
    return np.random.default_rng([int(base_seed), int(trial)])


def _detections_by_interval(scenario: Scenario) -> dict[int, list[tuple[int, int]]]:
    sched = scenario.schedule
    out: dict[int, list[tuple[int, int]]] = {}
    for k in range(1, scenario.q + 2):
        for i in range(1, scenario.length + 1):
            out.setdefault(int(sched.detection_interval(k, i)), []).append((k, i))
    return out


def _slot_contributions(scenario: Scenario, rng, src, backend):
    """Per-interval counts caused at every observer by each emission slot.

    Returns ``{node: (observer list, array (L, n_obs, K))}``.  Slots of S that
    carry a 0 are skipped; relay slots are all simulated because whether a
    relay fires depends on the threshold being evaluated.
    """
    topo, timing, sched = scenario.topology, scenario.timing, scenario.schedule
    K, M, L = sched.K, timing.M, scenario.length
    out = {}
    for em in range(scenario.q + 1):
        obs = topo.observers_of(em)
        dist = np.array([topo.distance(em, o) for o in obs], dtype=float)
        radius = np.array([topo.nodes[o].radius for o in obs], dtype=float)
        diff = topo.molecules[topo.emit_type[em]].diffusion
        n_a = int(round(scenario.protocol.n_molecules[em]))
        table = np.zeros((L, len(obs), K), dtype=np.int64)
        buf = np.zeros((len(obs), K * M), dtype=np.int64)
        for i in range(1, L + 1):
            if em == 0 and src[i - 1] == 0:
                continue
            buf[:] = 0
            e = int(sched.emission_interval(em, i))
            backend(rng, buf, dist, radius, n_a, e - 1, diff, timing.T, timing.t0, M)
            table[i - 1] = buf.reshape(len(obs), K, M).sum(axis=2)
        out[em] = (obs, table)
    return out


def _replay(scenario: Scenario, src, contrib, xis, rules, genie: bool):
    """Run the decision chain for every threshold in ``xis`` on shared counts."""
    q, L, K = scenario.q, scenario.length, scenario.schedule.K
    G = xis.size
    topo = scenario.topology
    hist = {k: np.zeros((G, K)) for k in range(1, q + 2)}
    emitted = {k: np.zeros((G, L)) for k in range(1, q + 1)}
    detected = np.zeros((G, q + 2, L), dtype=np.int8)
    detected[:, 0] = src
    s_obs, s_table = contrib[0]
    s_total = s_table.sum(axis=0)
    obs_index = {em: {o: n for n, o in enumerate(contrib[em][0])} for em in contrib}
    for tau, items in sorted(_detections_by_interval(scenario).items()):
        for k, i in items:
            total = np.zeros(G)
            for em in topo.emitters_seen_by(k):
                row = obs_index[em][k]
                if em == 0:
                    total += s_total[row, tau - 1]
                else:
                    total += emitted[em] @ contrib[em][1][:, row, tau - 1]
            if genie:
                dec = np.full(G, float(src[i - 1]))
            else:
                theta = xis + rules[k].offset(tau, hist[k])
                dec = (total >= theta).astype(float)
            hist[k][:, tau - 1] = dec
            if k <= q:
                emitted[k][:, i - 1] = dec
            detected[:, k, i - 1] = dec
    return detected


def _particle_detected(scenario: Scenario, rng, src, rules, genie: bool):
    """Sequential full-particle trial for the scenario's own threshold."""
    topo, timing, sched = scenario.topology, scenario.timing, scenario.schedule
    q, L, K, M = scenario.q, scenario.length, sched.K, timing.M
    diff = {kind: spec.diffusion for kind, spec in topo.molecules.items()}
    store = ParticleStore()
    tx = np.zeros((q + 1, K + 1), dtype=np.int8)
    tx[0, np.asarray(sched.emission_interval(0, np.arange(1, L + 1)))] = src
    hist = {k: np.zeros(K) for k in range(1, q + 2)}
    detected = np.zeros((1, q + 2, L), dtype=np.int8)
    detected[0, 0] = src
    detections = _detections_by_interval(scenario)
    xi = scenario.protocol.xi
    for tau in range(1, K + 1):
        for em in range(q + 1):
            if tx[em, tau]:
                release(store, topo.nodes[em].position, topo.emit_type[em],
                        int(round(scenario.protocol.n_molecules[em])))
        items = detections.get(tau, [])
        counts = {k: 0 for k, _ in items}
        for _ in range(M):
            brownian_step(store, timing.t0, diff, rng)
            for k in counts:
                counts[k] += sample_count(store, topo.nodes[k].position, topo.nodes[k].radius,
                                          topo.detect_type[k])
        gap = timing.T - M * timing.t0
        if gap > 1e-15 * timing.T:
            brownian_step(store, gap, diff, rng)
        for k, i in items:
            if genie:
                dec = int(src[i - 1])
            else:
                dec = int(counts[k] >= xi + rules[k].offset(tau, hist[k]))
            hist[k][tau - 1] = dec
            detected[0, k, i - 1] = dec
            if k <= q:
                tx[k, int(sched.emission_interval(k, i))] = dec
    return detected


def run_trial(scenario: Scenario, seed=(0, 0), xis=None, engine: str = "radial",
              genie: bool = False, alignment: str = "emission", backend=None) -> TrialResult:
    """One message of L bits through the chain.

    ``seed`` is ``(base_seed, trial_index)`` or a Generator.  ``xis`` lists
    fixed threshold parts to evaluate on the same molecules (radial engine
    only); by default the scenario's own threshold.  ``genie`` forces every
    node to decide the true source bit, which isolates schedule alignment.
    """
    if engine not in ENGINES:
        raise ValueError(f"engine must be one of {ENGINES}")
    rng = seed if isinstance(seed, np.random.Generator) else trial_rng(*seed)
    xis = np.atleast_1d(np.asarray(scenario.protocol.xi if xis is None else xis, dtype=float))
    if np.any(xis < 1):
        raise ValueError("threshold parts must be >= 1")
    rules = make_threshold_rules(scenario, kernel_tables(scenario), alignment)
    src = generate_source_bits(SourceModel(scenario.p1, scenario.length), rng)
    if engine == "radial":
        contrib = _slot_contributions(scenario, rng, src, backend or kernels.radial_counts)
        detected = _replay(scenario, src, contrib, xis, rules, genie)
    else:
        if xis.size != 1 or xis[0] != scenario.protocol.xi:
            raise ValueError("the particle engine evaluates only the scenario's own threshold")
        detected = _particle_detected(scenario, rng, src, rules, genie)
    node_errors = (detected != src[None, None, :]).sum(axis=2)
    node_errors[:, 0] = 0
    seed_tag = () if isinstance(seed, np.random.Generator) else tuple(int(v) for v in seed)
    return TrialResult(seed_tag, src, xis, detected, node_errors)


def _run_chunk(args):
    scenario, base_seed, start, stop, xis, engine, alignment = args
    acc = None
    for t in range(start, stop):
        res = run_trial(scenario, (base_seed, t), xis, engine, alignment=alignment)
        acc = res.node_errors.astype(np.int64) if acc is None else acc + res.node_errors
    return acc


def simulate_errors(scenario: Scenario, n_trials: int, base_seed: int = 0, xis=None,
                    engine: str = "radial", workers: int = 1, alignment: str = "emission",
                    chunk: int = 250) -> np.ndarray:
    """Summed per-node error counts, shape ``(len(xis), Q+2)``.

    Trials are split into fixed index ranges and summed as integers, so the
    result does not depend on the worker count or on completion order.
    """
    if n_trials < 1:
        raise ValueError("need at least one trial")
    xis_arr = np.atleast_1d(np.asarray(scenario.protocol.xi if xis is None else xis, dtype=float))
    jobs = [(scenario, base_seed, a, min(a + chunk, n_trials), xis_arr, engine, alignment)
            for a in range(0, n_trials, chunk)]
    if workers <= 1 or len(jobs) == 1:
        parts = [_run_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    return np.sum(parts, axis=0)


def estimate_error(scenario: Scenario, n_trials: int, base_seed: int = 0, xis=None,
                   engine: str = "radial", workers: int = 1, node: int | None = None,
                   alignment: str = "emission"):
    """End-to-end (or node ``node``) error rate over ``n_trials`` trials.

    Returns one ErrorEstimate, or a list aligned with ``xis`` when a grid is given.
    """
    totals = simulate_errors(scenario, n_trials, base_seed, xis, engine, workers, alignment)
    k = scenario.q + 1 if node is None else node
    n_bits = n_trials * scenario.length
    ests = [ErrorEstimate(n_trials, int(row[k]), n_bits) for row in totals]
    return ests if xis is not None else ests[0]
