"""Weighted-sum detection and the adaptive decision-threshold policies.

Detected histories are interval indexed: ``history[i-1]`` is the decision a
node made in interval ``i`` (0 in intervals where it did not detect).  A
decision made in interval ``i`` is re-emitted by the deciding node at the
start of interval ``i+1`` and by the next relay at the start of ``i+2``.

Two lag conventions are offered for the expected-interference sums:

``"emission"`` (default)
    each remembered decision is weighted by the kernel at the lag between
    its physical re-emission and the current interval, so the threshold
    offset equals the expected number of interfering molecules.
``"literal"``
    the lag is measured from the interval of the decision itself, which
    under-weights the most recent emissions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .model import Duplex, ProtocolConfig, Scheme

ALIGNMENTS = ("emission", "literal")

# interval gap between a decision and its re-emission
_SELF_DELAY = 1
_NEXT_DELAY = 2


class ThresholdKind(str, Enum):
    FIXED = "fixed"
    BI = "bi"            # backward-interference compensation
    SI = "si"            # self-interference compensation
    SI_BI_FD = "si_bi_fd"
    BI_HD = "bi_hd"

    @property
    def uses_bi(self) -> bool:
        return self in (ThresholdKind.BI, ThresholdKind.SI_BI_FD, ThresholdKind.BI_HD)

    @property
    def uses_si(self) -> bool:
        return self in (ThresholdKind.SI, ThresholdKind.SI_BI_FD)


@dataclass(frozen=True)
class ThresholdPolicy:
    kind: ThresholdKind
    xi: float

    def __post_init__(self):
        if not self.xi >= 1:
            raise ValueError(f"fixed threshold part must be >= 1, got {self.xi}")


@dataclass
class DetectionState:
    """Running decisions of one node within one trial."""

    node: int
    n_intervals: int
    history: np.ndarray = field(init=False)
    threshold: float = field(init=False, default=float("nan"))

    def __post_init__(self):
        self.history = np.zeros(self.n_intervals, dtype=np.int8)

    def record(self, interval: int, bit: int, threshold: float) -> None:
        if bit not in (0, 1):
            raise ValueError(f"detected bit must be 0 or 1, got {bit}")
        self.history[interval - 1] = bit
        self.threshold = threshold


# Protocol acronym -> threshold kind at relays that have a downstream relay.
_RELAY_KIND = {
    "FD": ThresholdKind.FIXED,
    "HD": ThresholdKind.FIXED,
    "FD-A": ThresholdKind.BI,
    "FD-A-SI": ThresholdKind.SI,
    "FD-A-BI-SI": ThresholdKind.SI_BI_FD,
    "HD-A-BI": ThresholdKind.BI_HD,
}


def policy_for(protocol: ProtocolConfig | str, node: int, q: int, xi: float | None = None) -> ThresholdPolicy:
    """Threshold policy of node ``node`` (1..Q+1) under a protocol.

    The destination always detects with the fixed threshold.  The last
    relay has no downstream relay, so any backward-interference part is
    dropped there while self-interference compensation is kept.
    """
    if isinstance(protocol, ProtocolConfig):
        acronym, xi = protocol.protocol, protocol.xi if xi is None else xi
    else:
        acronym = protocol
    if xi is None:
        raise ValueError("a fixed threshold part is required")
    if acronym not in _RELAY_KIND:
        raise ValueError(f"unknown protocol {acronym!r}")
    if not 1 <= node <= q + 1:
        raise ValueError(f"node {node} does not detect in a chain with Q={q}")
    if node == q + 1:
        return ThresholdPolicy(ThresholdKind.FIXED, xi)
    kind = _RELAY_KIND[acronym]
    if node == q:
        kind = {ThresholdKind.BI: ThresholdKind.FIXED,
                ThresholdKind.BI_HD: ThresholdKind.FIXED,
                ThresholdKind.SI_BI_FD: ThresholdKind.SI}.get(kind, kind)
    return ThresholdPolicy(kind, xi)


def weighted_sum_decide(sample_counts, threshold: float) -> int:
    """Equal-weight sum of the M samples compared against the threshold (ties decide 1)."""
    counts = np.asarray(sample_counts)
    if counts.size < 1:
        raise ValueError("need at least one sample")
    return int(counts.sum() >= threshold)


def _check_alignment(alignment: str) -> None:
    if alignment not in ALIGNMENTS:
        raise ValueError(f"alignment must be one of {ALIGNMENTS}, got {alignment!r}")


def _expected(history, sums, j: int, delay: int, horizon: int, alignment: str):
    """``N``-free sum over decisions in intervals ``1..j-horizon``.

    Works on a batch: ``history`` may carry leading axes.
    """
    hist = np.asarray(history, dtype=float)
    sums = np.asarray(sums, dtype=float)
    n = min(j - horizon, hist.shape[-1])
    if n <= 0:
        return np.zeros(hist.shape[:-1]) if hist.ndim > 1 else 0.0
    i = np.arange(1, n + 1)
    lag = j - i - (delay if alignment == "emission" else 0)
    w = np.where((lag >= 0) & (lag < sums.size), sums[np.clip(lag, 0, sums.size - 1)], 0.0)
    out = hist[..., :n] @ w
    return out if np.ndim(out) else float(out)


def _sums(kernel):
    return kernel.sums if hasattr(kernel, "sums") else np.asarray(kernel, dtype=float)


def bi_offset(j: int, history, kernel, n_a: float, alignment: str = "emission"):
    """Expected count at a relay from the next relay re-sending its decisions up to ``j-2``."""
    _check_alignment(alignment)
    return n_a * _expected(history, _sums(kernel), j, _NEXT_DELAY, 2, alignment)


def si_offset(j: int, history, kernel, n_a: float, alignment: str = "emission"):
    """Expected count at a relay from its own re-sent decisions up to ``j-1``."""
    _check_alignment(alignment)
    return n_a * _expected(history, _sums(kernel), j, _SELF_DELAY, 1, alignment)


def threshold_bi(node: int, q: int, j: int, history, kernel, n_a: float, xi: float,
                 alignment: str = "emission"):
    """Fixed part plus the expected backward interference from relay ``node+1``."""
    if node >= q:
        raise ValueError(f"node {node} has no downstream relay (Q={q}); its threshold is fixed")
    return xi + bi_offset(j, history, kernel, n_a, alignment)


def threshold_si(j: int, history, kernel, n_a: float, xi: float, alignment: str = "emission"):
    """Fixed part plus the expected count of the relay's own earlier emissions."""
    return xi + si_offset(j, history, kernel, n_a, alignment)


def threshold_fd_si_bi(node: int, q: int, j: int, history, self_kernel, next_kernel,
                       n_self: float, n_next: float, xi: float, alignment: str = "emission"):
    """Joint compensation for full duplex; the backward part vanishes at the last relay."""
    out = threshold_si(j, history, self_kernel, n_self, xi, alignment)
    if node < q:
        out = out + bi_offset(j, history, next_kernel, n_next, alignment)
    return out


def threshold_hd_bi(node: int, q: int, l: int, history, kernel, n_a: float, xi: float,
                    alignment: str = "emission"):
    """Half-duplex backward compensation; ``l`` must be one of the node's detection intervals."""
    if (l - node) % 2:
        raise ValueError(f"node {node} does not detect in interval {l} under half duplex")
    if node >= q:
        return float(xi)
    return xi + bi_offset(l, history, kernel, n_a, alignment)


@dataclass(frozen=True)
class ThresholdRule:
    """Pre-resolved threshold computation for one detecting node.

    ``self_sums`` and ``next_sums`` are the kernel sums of the node's own
    emissions and of the next relay's emissions at this node.
    """

    node: int
    policy: ThresholdPolicy
    self_sums: np.ndarray | None = None
    next_sums: np.ndarray | None = None
    n_self: float = 0.0
    n_next: float = 0.0
    alignment: str = "emission"

    def offset(self, j: int, history):
        """Adaptive part only; zero under the fixed policy."""
        out = 0.0
        kind = self.policy.kind
        if kind.uses_si:
            out = out + si_offset(j, history, self.self_sums, self.n_self, self.alignment)
        if kind.uses_bi:
            out = out + bi_offset(j, history, self.next_sums, self.n_next, self.alignment)
        return out

    def __call__(self, j: int, history):
        return self.policy.xi + self.offset(j, history)


def make_threshold_rules(scenario, kernels, alignment: str = "emission") -> dict[int, ThresholdRule]:
    """One rule per detecting node 1..Q+1 of a scenario."""
    _check_alignment(alignment)
    q = scenario.q
    proto = scenario.protocol
    if proto.scheme is not Scheme.SM and proto.protocol not in ("FD", "FD-A"):
        raise ValueError(f"protocol {proto.protocol} is not defined for {proto.scheme.value}")
    if proto.duplex is Duplex.HD and proto.scheme is not Scheme.SM:
        raise ValueError("half duplex is only defined for a shared molecule type")
    rules = {}
    for k in range(1, q + 2):
        pol = policy_for(proto, k, q)
        self_sums = next_sums = None
        n_self = n_next = 0.0
        if pol.kind.uses_si:
            self_sums, n_self = kernels[k, k].sums, proto.n_molecules[k]
        if pol.kind.uses_bi:
            next_sums, n_next = kernels[k + 1, k].sums, proto.n_molecules[k + 1]
        rules[k] = ThresholdRule(k, pol, self_sums, next_sums, n_self, n_next, alignment)
    return rules
