"""Analytical expected-error engine for single links and relay chains.

Relay decision histories are not enumerated.  Each relay's detected bits
are replaced by a coin-toss surrogate: the source bit flipped with the
error probability the recursion has reached for that bit at that relay.
Every evaluation below is vectorized over ``R`` independent realizations
(source sequence plus surrogates), so the network average and its spread
come out of one pass.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .channel import ObservationKernel, kernel_tables, poisson_cdf
from .detection import make_threshold_rules
from .model import Scenario, pad_sequence

# histories up to this length are enumerated exactly
J_ENUM = 12
N_MC_HISTORIES = 1000
COIN_MODES = ("conditional", "combined")


# ---------------------------------------------------------------- single link

def single_link_error(m0, m1, xi, p1: float = 0.5):
    """Error of one ON/OFF decision given the Poisson means under bit 0 and bit 1."""
    miss = poisson_cdf(xi, m1)
    false_alarm = 1.0 - poisson_cdf(xi, m0)
    return p1 * miss + (1.0 - p1) * false_alarm


def link_means(history, sums, n_a: float, j: int):
    """``(m0, m1)`` for bit ``j`` of a single link given earlier bits ``history[..., :j-1]``.

    ``sums[lag]`` is the kernel sum over the M samples of an interval.
    """
    sums = np.asarray(sums, dtype=float)
    hist = np.asarray(history, dtype=float)[..., : j - 1]
    lags = j - np.arange(1, j)
    w = np.where(lags < sums.size, sums[np.minimum(lags, sums.size - 1)], 0.0)
    isi = n_a * (hist @ w) if j > 1 else np.zeros(hist.shape[:-1])
    return isi, isi + n_a * sums[0]


def _history_sample(j: int, p1: float, j_enum: int, n_mc: int, rng):
    """Histories of length ``j-1`` with weights: exact enumeration or equal-weight samples."""
    n = j - 1
    if n <= j_enum:
        hist = np.array(list(itertools.product((0, 1), repeat=n)), dtype=float).reshape(2 ** n, n)
        ones = hist.sum(axis=1)
        weights = p1 ** ones * (1.0 - p1) ** (n - ones)
        return hist, weights
    hist = (rng.random((n_mc, n)) < p1).astype(float)
    return hist, np.full(n_mc, 1.0 / n_mc)


def average_single_link_error(j: int, sums, n_a: float, xi: float, p1: float = 0.5,
                              j_enum: int = J_ENUM, n_mc: int = N_MC_HISTORIES, seed: int = 0):
    """Error of bit ``j`` averaged over all earlier source bits."""
    if j < 1:
        raise ValueError("bit index starts at 1")
    rng = np.random.default_rng(seed)
    hist, weights = _history_sample(j, p1, j_enum, n_mc, rng)
    m0, m1 = link_means(hist, sums, n_a, j)
    return float(weights @ single_link_error(m0, m1, xi, p1))


def expected_link_error(sums, n_a: float, xi: float, length: int, p1: float = 0.5,
                        j_enum: int = J_ENUM, n_mc: int = N_MC_HISTORIES, seed: int = 0) -> float:
    """Single-link error averaged over bit positions ``1..length`` and their histories.

    Positions past ``j_enum+1`` share one set of ``n_mc`` sampled sequences so a
    sweep evaluated with the same seed uses common random numbers.
    """
    total = 0.0
    rng = np.random.default_rng(seed)
    mc = (rng.random((n_mc, length)) < p1).astype(float)
    for j in range(1, length + 1):
        if j - 1 <= j_enum:
            hist, weights = _history_sample(j, p1, j_enum, n_mc, rng)
        else:
            hist, weights = mc[:, : j - 1], np.full(n_mc, 1.0 / n_mc)
        m0, m1 = link_means(hist, sums, n_a, j)
        total += float(weights @ single_link_error(m0, m1, xi, p1))
    return total / length


# ---------------------------------------------------------------- hop recursion

def combine_hop(pe1_prev, pe0_prev, h0, h1):
    """Extend the error of the first hops by one more hop.

    ``h_x`` is the probability that the next detector sees fewer molecules
    than its threshold when the previous node sent ``x``.
    """
    pe1 = pe1_prev * h0 + (1.0 - pe1_prev) * h1
    pe0 = pe0_prev * (1.0 - h1) + (1.0 - pe0_prev) * (1.0 - h0)
    return pe1, pe0


def two_hop_error(eps1, eps2):
    """End-to-end error of two independent symmetric hops."""
    return eps1 * (1.0 - eps2) + (1.0 - eps1) * eps2


def xor_cascade(eps: float, hops: int) -> float:
    """Closed form for ``hops`` independent symmetric hops of error ``eps``."""
    return 0.5 * (1.0 - (1.0 - 2.0 * eps) ** hops)


@dataclass(frozen=True)
class HistorySurrogate:
    """Modeled detected bits of one node: source bits flipped by coin tosses."""

    node: int
    bits: np.ndarray
    flip_prob: np.ndarray
    seed: int | None = None


def coin_toss_surrogate(source_bits, error_probs, node: int = 1, seed: int | None = None,
                        rng: np.random.Generator | None = None) -> HistorySurrogate:
    """``W_hat[i] = |lambda_i - W_S[i]|`` with ``lambda_i ~ Bernoulli(error_probs[i])``."""
    src = np.asarray(source_bits, dtype=np.int8)
    p = np.broadcast_to(np.asarray(error_probs, dtype=float), src.shape)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("flip probabilities must lie in [0, 1]")
    if rng is None:
        rng = np.random.default_rng(seed)
    lam = (rng.random(src.shape) < p).astype(np.int8)
    return HistorySurrogate(node, np.abs(lam - src).astype(np.int8), np.array(p), seed)


@dataclass
class ErrorProfile:
    """Per-stage, per-bit conditional errors over ``R`` realizations.

    ``cond1[k]`` and ``cond0[k]`` have shape ``(R, L)`` and hold the error
    at node ``k`` (1..Q+1) for source bit 1 and 0.  Index 0 is unused.
    """

    p1: float
    cond1: list
    cond0: list
    source: np.ndarray

    @property
    def q(self) -> int:
        return len(self.cond1) - 2

    def combined(self, node: int | None = None) -> np.ndarray:
        k = self.q + 1 if node is None else node
        return self.p1 * self.cond1[k] + (1.0 - self.p1) * self.cond0[k]

    def average(self, node: int | None = None) -> float:
        return float(self.combined(node).mean())

    def stderr(self, node: int | None = None) -> float:
        per_real = self.combined(node).mean(axis=1)
        if per_real.size < 2:
            return float("nan")
        return float(per_real.std(ddof=1) / np.sqrt(per_real.size))

    @property
    def end_to_end(self) -> float:
        return self.average()


def _sums_of(kern) -> np.ndarray:
    return kern.sums if isinstance(kern, ObservationKernel) else np.asarray(kern, dtype=float)


def network_error(scenario: Scenario, n_realizations: int = 1, seed: int = 0,
                  source_bits=None, kernels=None, background: float = 0.0,
                  alignment: str = "emission", coin: str = "conditional") -> ErrorProfile:
    """Expected error of every node for every source bit, with surrogate relay histories.

    Intervals are walked in order.  At each detection the background mean
    is built from every same-type emitter's (surrogate) transmissions, the
    intended emission is swapped for bit 0 and bit 1, and the probability
    of falling below the node's threshold under each hypothesis advances
    the hop recursion.  The node's surrogate decision is then drawn by a
    coin toss so later detections see a consistent history.

    ``coin`` selects the flip probability of a surrogate bit: the error
    given the realized source bit (``"conditional"``) or its prior-weighted
    average over both source values (``"combined"``).  The averaged form
    ignores that misses and false alarms have very different rates and
    underestimates the end-to-end error by several points at the optimum.

    ``background`` adds a constant Poisson mean at every detector; with it
    and hand-made kernels the recursion can be driven by synthetic links.
    """
    if coin not in COIN_MODES:
        raise ValueError(f"coin must be one of {COIN_MODES}")
    topo, sched, proto = scenario.topology, scenario.schedule, scenario.protocol
    q, L, K = scenario.q, scenario.length, sched.K
    p1 = scenario.p1
    rng = np.random.default_rng(seed)
    if kernels is None:
        kernels = kernel_tables(scenario)
    sums = {key: _sums_of(k) for key, k in kernels.items()}
    if source_bits is None:
        src = (rng.random((n_realizations, L)) < p1).astype(np.int8)
    else:
        src = np.atleast_2d(np.asarray(source_bits, dtype=np.int8))
        if src.shape[-1] != L:
            raise ValueError(f"expected {L} source bits, got {src.shape[-1]}")
        src = np.broadcast_to(src, (n_realizations, L)).copy() if src.shape[0] == 1 else src
    R = src.shape[0]

    # transmit sequences (interval indexed) and detection histories per node
    tx = {0: pad_sequence(src, 0, sched).astype(float)}
    for k in range(1, q + 1):
        tx[k] = np.zeros((R, K))
    hist = {k: np.zeros((R, K)) for k in range(1, q + 2)}
    rules = make_threshold_rules(scenario, kernels if _all_kernels(kernels) else _wrap(sums), alignment)

    cond1 = [None] + [np.zeros((R, L)) for _ in range(q + 1)]
    cond0 = [None] + [np.zeros((R, L)) for _ in range(q + 1)]
    detections = _detections_by_interval(sched, q, L)
    n_tx = proto.n_molecules

    for tau in range(1, K + 1):
        for k, i in detections.get(tau, ()):
            prev = k - 1
            bg = np.full(R, float(background))
            for em in topo.emitters_seen_by(k):
                s = sums[em, k]
                w = np.where(np.arange(tau) < s.size, s[np.minimum(np.arange(tau), s.size - 1)], 0.0)
                seq = tx[em][:, :tau]
                if em == prev:
                    seq = seq.copy()
                    seq[:, tau - 1] = 0.0
                bg += n_tx[em] * (seq @ w[::-1])
            signal = n_tx[prev] * sums[prev, k][0]
            theta = rules[k](tau, hist[k])
            h0 = poisson_cdf(theta, bg)
            h1 = poisson_cdf(theta, bg + signal)
            if k == 1:
                pe1, pe0 = h1, 1.0 - h0
            else:
                pe1, pe0 = combine_hop(cond1[k - 1][:, i - 1], cond0[k - 1][:, i - 1], h0, h1)
            cond1[k][:, i - 1] = pe1
            cond0[k][:, i - 1] = pe0
            if k <= q:
                bit = src[:, i - 1]
                if coin == "combined":
                    flip = p1 * pe1 + (1.0 - p1) * pe0
                else:
                    flip = np.where(bit == 1, pe1, pe0)
                lam = (rng.random(R) < flip).astype(np.int8)
                decided = np.abs(lam - bit)
                hist[k][:, tau - 1] = decided
                tx[k][:, sched.emission_interval(k, i) - 1] = decided
    return ErrorProfile(p1, cond1, cond0, src)


def multi_hop_error(scenario: Scenario, source_bits, seed: int = 0, **kw) -> ErrorProfile:
    """Single surrogate realization for one given source sequence."""
    if scenario.q < 1:
        raise ValueError("a relay network needs Q >= 1")
    return network_error(scenario, 1, seed, source_bits=source_bits, **kw)


def half_duplex_error(scenario: Scenario, source_bits, seed: int = 0, **kw) -> ErrorProfile:
    """Same recursion on a half-duplex schedule; silent intervals carry zeros."""
    if scenario.schedule.duplex.value != "HD":
        raise ValueError("scenario does not use a half-duplex schedule")
    return network_error(scenario, 1, seed, source_bits=source_bits, **kw)


def expected_network_error(scenario: Scenario, n_realizations: int = 200, seed: int = 0,
                           **kw) -> tuple[float, float]:
    """End-to-end error averaged over source sequences and surrogates, with its standard error."""
    prof = network_error(scenario, n_realizations, seed, **kw)
    return prof.end_to_end, prof.stderr()


def _detections_by_interval(sched, q: int, L: int) -> dict[int, list[tuple[int, int]]]:
    out: dict[int, list[tuple[int, int]]] = {}
    for k in range(1, q + 2):
        for i in range(1, L + 1):
            out.setdefault(int(sched.detection_interval(k, i)), []).append((k, i))
    return out


class _SumsOnly:
    def __init__(self, sums):
        self.sums = np.asarray(sums, dtype=float)


def _all_kernels(kernels) -> bool:
    return all(hasattr(k, "sums") for k in kernels.values())


def _wrap(sums):
    return {key: _SumsOnly(s) for key, s in sums.items()}
