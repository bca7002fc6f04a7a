"""Free 3-D Brownian particles: store, release, step and count."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ParticleStore:
    """Positions (metres) per molecule type; nothing is ever removed."""

    positions: dict[int, np.ndarray] = field(default_factory=dict)
    released: dict[int, int] = field(default_factory=dict)

    def count(self, kind: int | None = None) -> int:
        if kind is None:
            return sum(p.shape[0] for p in self.positions.values())
        return self.positions.get(kind, np.empty((0, 3))).shape[0]


def release(store: ParticleStore, center, kind: int, n_a: int) -> ParticleStore:
    """Insert ``n_a`` molecules of type ``kind`` at ``center``."""
    n_a = int(n_a)
    if n_a < 0:
        raise ValueError("cannot release a negative number of molecules")
    if n_a == 0:
        return store
    new = np.broadcast_to(np.asarray(center, dtype=float), (n_a, 3))
    old = store.positions.get(kind)
    store.positions[kind] = new.copy() if old is None else np.concatenate([old, new])
    store.released[kind] = store.released.get(kind, 0) + n_a
    return store


def brownian_step(store: ParticleStore, dt: float, diffusion: dict[int, float],
                  rng: np.random.Generator) -> ParticleStore:
    """Add an independent N(0, 2 D dt) displacement to every coordinate.

    The Gaussian increment is exact for free diffusion, so several unsampled
    steps may be merged into one call with the summed duration.
    """
    if not dt > 0:
        raise ValueError("time step must be positive")
    for kind in sorted(store.positions):
        pos = store.positions[kind]
        std = np.sqrt(2.0 * diffusion[kind] * dt)
        if pos.shape[0] and std > 0:
            pos += std * rng.standard_normal(pos.shape)
    return store


def sample_count(store: ParticleStore, center, radius: float, kind: int) -> int:
    """Molecules of ``kind`` whose centre lies inside the sphere (boundary included)."""
    pos = store.positions.get(kind)
    if pos is None or pos.shape[0] == 0:
        return 0
    d2 = np.sum((pos - np.asarray(center, dtype=float)) ** 2, axis=1)
    return int(np.count_nonzero(d2 <= radius * radius))
