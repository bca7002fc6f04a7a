"""Domain types: nodes, topology, molecule assignment, timing and bit schedules.

Nodes are indexed ``0 .. Q+1``; node 0 is the source S and node ``Q+1`` the
destination D, so relays and end points share one code path.  Bit indices
are 1-based and so are bit intervals, matching the usual notation
``t(j, m) = (j-1) T + m t0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

# Default environment: equiprobable bits, 50-bit messages, 45 nm nodes.
DEFAULT_P1 = 0.5
DEFAULT_LENGTH = 50
DEFAULT_RADIUS = 45e-9
DEFAULT_DIFFUSION = 4.365e-10


class Scheme(str, Enum):
    MM = "MM-MH"
    TWO_M = "2M-MH"
    SM = "SM-MH"


class Duplex(str, Enum):
    FD = "FD"
    HD = "HD"


# Legal protocol acronyms per scheme.
PROTOCOLS: dict[Scheme, tuple[str, ...]] = {
    Scheme.MM: ("FD",),
    Scheme.TWO_M: ("FD", "FD-A"),
    Scheme.SM: ("FD", "FD-A-SI", "HD", "FD-A-BI-SI", "HD-A-BI"),
}


def parse_scheme(value: str | Scheme) -> Scheme:
    if isinstance(value, Scheme):
        return value
    key = str(value).strip().upper()
    for s in Scheme:
        if s.value == key or s.name == key:
            return s
    raise ValueError(f"unknown relaying scheme {value!r}; expected one of "
                     f"{[s.value for s in Scheme]}")


@dataclass(frozen=True)
class NodeSpec:
    index: int
    position: tuple[float, float, float]
    radius: float

    @property
    def volume(self) -> float:
        return 4.0 / 3.0 * math.pi * self.radius ** 3


@dataclass(frozen=True)
class MoleculeSpec:
    type_id: int
    diffusion: float

    def __post_init__(self):
        if not self.diffusion > 0:
            raise ValueError(f"diffusion coefficient must be positive, got {self.diffusion}")


@dataclass(frozen=True)
class NetworkTopology:
    """Collinear, equally spaced chain S, R_1 .. R_Q, D.

    ``detect_type[k]`` is ``None`` for S and ``emit_type[k]`` is ``None``
    for D; all other entries are molecule type ids (1-based, ``A_f``).
    """

    scheme: Scheme
    x_d: float
    q: int
    nodes: tuple[NodeSpec, ...]
    detect_type: tuple[int | None, ...]
    emit_type: tuple[int | None, ...]
    molecules: dict[int, MoleculeSpec] = field(hash=False)

    @property
    def n_nodes(self) -> int:
        return self.q + 2

    @property
    def destination(self) -> int:
        return self.q + 1

    def distance(self, a: int, b: int) -> float:
        pa = np.asarray(self.nodes[a].position)
        pb = np.asarray(self.nodes[b].position)
        return float(np.linalg.norm(pa - pb))

    def emitters_seen_by(self, observer: int) -> list[int]:
        """Nodes whose emissions the observer cannot tell apart from its own signal."""
        kind = self.detect_type[observer]
        if kind is None:
            return []
        return [k for k in range(self.q + 1) if self.emit_type[k] == kind]

    def observers_of(self, emitter: int) -> list[int]:
        kind = self.emit_type[emitter]
        if kind is None:
            return []
        return [k for k in range(1, self.q + 2) if self.detect_type[k] == kind]


def molecule_assignment(scheme: Scheme, q: int) -> tuple[tuple, tuple]:
    """(detect, emit) molecule type per node for the given scheme."""
    n = q + 2
    detect: list[int | None] = [None] * n
    emit: list[int | None] = [None] * n
    for k in range(n):
        if scheme is Scheme.MM:
            d, e = k, k + 1
        elif scheme is Scheme.TWO_M:
            # odd nodes detect A1 and emit A2, even nodes the reverse
            d, e = (1, 2) if k % 2 else (2, 1)
        else:
            d, e = 1, 1
        if k > 0:
            detect[k] = d
        if k < n - 1:
            emit[k] = e
    return tuple(detect), tuple(emit)


def build_topology(x_d: float, q: int, radii: float | list[float] = DEFAULT_RADIUS,
                   scheme: Scheme | str = Scheme.MM,
                   diffusion: float | dict[int, float] = DEFAULT_DIFFUSION) -> NetworkTopology:
    """Place ``q`` relays evenly between S at the origin and D at ``(x_d, 0, 0)``."""
    scheme = parse_scheme(scheme)
    if not x_d > 0:
        raise ValueError(f"destination distance must be positive, got {x_d}")
    if int(q) != q or q < 0:
        raise ValueError(f"relay count must be a non-negative integer, got {q}")
    q = int(q)
    if np.isscalar(radii):
        radii = [float(radii)] * (q + 2)
    radii = [float(r) for r in radii]
    if len(radii) != q + 2:
        raise ValueError(f"expected {q + 2} radii, got {len(radii)}")
    if any(not r > 0 for r in radii):
        raise ValueError(f"node radii must be positive, got {radii}")
    spacing = x_d / (q + 1)
    nodes = tuple(NodeSpec(k, (k * spacing, 0.0, 0.0), radii[k]) for k in range(q + 2))
    detect, emit = molecule_assignment(scheme, q)
    types = sorted({t for t in detect + emit if t is not None})
    if isinstance(diffusion, dict):
        molecules = {t: MoleculeSpec(t, float(diffusion[t])) for t in types}
    else:
        molecules = {t: MoleculeSpec(t, float(diffusion)) for t in types}
    return NetworkTopology(scheme, float(x_d), q, nodes, detect, emit, molecules)


@dataclass(frozen=True)
class TimingConfig:
    """Bit interval ``T``, ``M`` samples per interval spaced ``t0`` apart."""

    T: float
    M: int
    t0: float

    def __post_init__(self):
        if not (self.T > 0 and self.t0 > 0):
            raise ValueError("bit interval and sample spacing must be positive")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"samples per interval must be a positive integer, got {self.M}")
        if self.M * self.t0 > self.T * (1 + 1e-12):
            raise ValueError(f"M*t0 = {self.M * self.t0:g} s exceeds the bit interval {self.T:g} s")

    @property
    def offsets(self) -> np.ndarray:
        """Sample times ``t_m = m t0`` within an interval, m = 1..M."""
        return self.t0 * np.arange(1, self.M + 1)

    def sample_time(self, j: int, m: int) -> float:
        return (j - 1) * self.T + m * self.t0


@dataclass(frozen=True)
class SourceModel:
    p1: float = DEFAULT_P1
    length: int = DEFAULT_LENGTH
    seed: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.p1 <= 1.0:
            raise ValueError(f"P1 must lie in [0, 1], got {self.p1}")
        if self.length < 1:
            raise ValueError(f"message length must be at least 1, got {self.length}")

    @property
    def p0(self) -> float:
        return 1.0 - self.p1


def generate_source_bits(source: SourceModel, rng: np.random.Generator | None = None) -> np.ndarray:
    """I.i.d. Bernoulli(P1) bits as an int8 array of length L."""
    if rng is None:
        rng = np.random.default_rng(source.seed)
    return (rng.random(source.length) < source.p1).astype(np.int8)


@dataclass(frozen=True)
class BitSchedule:
    """Transmit and detect slots for every node over ``K`` intervals.

    Masks are boolean arrays of shape ``(Q+2, K+1)`` indexed by interval
    (column 0 unused).  Under FD relay k sends bit i in interval ``i+k``;
    under HD it sends bit i in interval ``k+2i-1`` and stays silent in
    between.  The receiving node detects in the interval of the send.
    """

    duplex: Duplex
    length: int
    q: int

    def __post_init__(self):
        if self.length < 1 or self.q < 0:
            raise ValueError("schedule needs L >= 1 and Q >= 0")

    @property
    def K(self) -> int:
        if self.duplex is Duplex.FD:
            return self.length + self.q
        return 2 * self.length + self.q - 1

    def emission_interval(self, node: int, bit) -> np.ndarray | int:
        """Interval in which ``node`` (0..Q) sends bit ``bit`` (1..L)."""
        if self.duplex is Duplex.FD:
            return bit + node
        return node + 2 * bit - 1

    def detection_interval(self, node: int, bit) -> np.ndarray | int:
        """Interval in which ``node`` (1..Q+1) decides on bit ``bit``."""
        return self.emission_interval(node - 1, bit)

    def transmit_mask(self) -> np.ndarray:
        mask = np.zeros((self.q + 2, self.K + 1), dtype=bool)
        bits = np.arange(1, self.length + 1)
        for k in range(self.q + 1):
            mask[k, self.emission_interval(k, bits)] = True
        return mask

    def detect_mask(self) -> np.ndarray:
        mask = np.zeros((self.q + 2, self.K + 1), dtype=bool)
        bits = np.arange(1, self.length + 1)
        for k in range(1, self.q + 2):
            mask[k, self.detection_interval(k, bits)] = True
        return mask


def make_schedule(mode: Duplex | str, length: int, q: int) -> BitSchedule:
    return BitSchedule(Duplex(mode), int(length), int(q))


def pad_sequence(bits, node: int, schedule: BitSchedule) -> np.ndarray:
    """Lay node ``node``'s L bits onto the K-interval grid (index 0 = interval 1)."""
    bits = np.asarray(bits, dtype=np.int8)
    if bits.shape[-1] != schedule.length:
        raise ValueError(f"expected {schedule.length} bits, got {bits.shape[-1]}")
    if not 0 <= node <= schedule.q:
        raise ValueError(f"node {node} does not transmit in a chain with Q={schedule.q}")
    out = np.zeros(bits.shape[:-1] + (schedule.K,), dtype=np.int8)
    idx = np.asarray(schedule.emission_interval(node, np.arange(1, schedule.length + 1))) - 1
    out[..., idx] = bits
    return out


@dataclass(frozen=True)
class ProtocolConfig:
    """Relaying scheme, protocol acronym, fixed threshold part and per-node budget.

    ``n_molecules`` is the count released for bit 1 by each transmitting
    node S, R_1 .. R_Q (length Q+1).
    """

    scheme: Scheme
    protocol: str
    xi: float
    n_molecules: tuple[float, ...]

    def __post_init__(self):
        scheme = parse_scheme(self.scheme)
        object.__setattr__(self, "scheme", scheme)
        if self.protocol not in PROTOCOLS[scheme]:
            raise ValueError(f"protocol {self.protocol!r} is not defined for {scheme.value}; "
                             f"legal: {PROTOCOLS[scheme]}")
        if not self.xi >= 1:
            raise ValueError(f"detection threshold must be >= 1, got {self.xi}")
        if any(n < 0 for n in self.n_molecules):
            raise ValueError("molecule counts must be non-negative")

    @property
    def duplex(self) -> Duplex:
        return Duplex.HD if self.protocol.startswith("HD") else Duplex.FD


@dataclass(frozen=True)
class Scenario:
    """Everything both engines need to describe one network configuration."""

    topology: NetworkTopology
    timing: TimingConfig
    protocol: ProtocolConfig
    schedule: BitSchedule
    p1: float = DEFAULT_P1

    def __post_init__(self):
        q = self.topology.q
        if self.schedule.q != q:
            raise ValueError("schedule and topology disagree on the relay count")
        if len(self.protocol.n_molecules) != q + 1:
            raise ValueError(f"need one molecule budget per transmitter ({q + 1}), "
                             f"got {len(self.protocol.n_molecules)}")
        if self.protocol.scheme is not self.topology.scheme:
            raise ValueError("protocol and topology use different relaying schemes")
        if self.protocol.duplex is not self.schedule.duplex:
            raise ValueError(f"protocol {self.protocol.protocol} needs a "
                             f"{self.protocol.duplex.value} schedule")

    @property
    def q(self) -> int:
        return self.topology.q

    @property
    def length(self) -> int:
        return self.schedule.length


def split_budget_evenly(n_total: float, n_nodes: int) -> list[int]:
    """Integer per-node budgets summing exactly to ``n_total``; earlier nodes take the remainder."""
    total = int(round(n_total))
    base, rem = divmod(total, n_nodes)
    return [base + (1 if k < rem else 0) for k in range(n_nodes)]


def make_scenario(scheme: Scheme | str = Scheme.MM, protocol: str = "FD", q: int = 1,
                  x_d: float = 1e-6, T: float = 200e-6, M: int = 10, t0: float = 20e-6,
                  xi: float = 10, n_total: float = 2e4, split_budget: bool = True,
                  length: int = DEFAULT_LENGTH, p1: float = DEFAULT_P1,
                  radius: float = DEFAULT_RADIUS,
                  diffusion: float = DEFAULT_DIFFUSION) -> Scenario:
    """Scenario with the default environment parameters.

    With ``split_budget`` every transmitter releases about ``n_total/(Q+1)``
    molecules so the network spends the same budget as the direct link.
    """
    scheme = parse_scheme(scheme)
    topo = build_topology(x_d, q, radius, scheme, diffusion)
    budgets = split_budget_evenly(n_total, q + 1) if split_budget else [int(n_total)] * (q + 1)
    proto = ProtocolConfig(scheme, protocol, xi, tuple(budgets))
    sched = make_schedule(proto.duplex, length, q)
    return Scenario(topo, TimingConfig(T, M, t0), proto, sched, p1)
