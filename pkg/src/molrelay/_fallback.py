"""Pure-Python twin of the compiled kernel, draw for draw.

Used when the extension is not built or ``MOLRELAY_PURE_PYTHON`` is set.
"""

from __future__ import annotations

import math

import numpy as np


def _track(rng, rho, t, locate, row, first, n_local, t_end, r, diffusion, T, t0, M):
    # k is the local index of the last sample taken; -1 before the first one
    k = -1
    while True:
        if rho > r:
            u = rng.random()
            if u * rho >= r:
                return
            z = rng.standard_normal()
            if z == 0.0:
                return
            t = t + (rho - r) * (rho - r) / (2.0 * diffusion * z * z)
            rho = r
            locate = True
        if locate:
            # first sample strictly after the arrival time t
            locate = False
            if t >= t_end:
                return
            j = math.floor(t / T)
            o = t - j * T
            m = max(math.floor(o / t0), 0)
            if m >= M:
                j += 1
                m = 0
            k = max(j * M + m, k + 1)
        else:
            k += 1
        if k >= n_local:
            return
        ts = (k // M) * T + (k % M + 1) * t0
        s = math.sqrt(2.0 * diffusion * max(ts - t, 0.0))
        x = rho + s * rng.standard_normal()
        y = s * rng.standard_normal()
        w = s * rng.standard_normal()
        rho = math.sqrt(x * x + y * y + w * w)
        t = ts
        if rho <= r:
            row[first + k] += 1


def radial_counts(rng: np.random.Generator, counts: np.ndarray, dist: np.ndarray,
                  radius: np.ndarray, n_mol: int, emit_interval: int, diffusion: float,
                  T: float, t0: float, M: int) -> None:
    n_obs, n_samples = counts.shape
    first = emit_interval * M
    n_local = n_samples - first
    t_end = (n_samples // M - emit_interval) * T
    if n_mol <= 0 or n_local <= 0:
        return
    for o in range(n_obs):
        d0, r = float(dist[o]), float(radius[o])
        row = counts[o]
        if d0 > r:
            n_hit = int(rng.binomial(n_mol, r / d0))
            for _ in range(n_hit):
                z = rng.standard_normal()
                if z == 0.0:
                    continue
                t = (d0 - r) * (d0 - r) / (2.0 * diffusion * z * z)
                _track(rng, r, t, True, row, first, n_local, t_end, r, diffusion, T, t0, M)
        else:
            for _ in range(n_mol):
                _track(rng, d0, 0.0, False, row, first, n_local, t_end, r, diffusion, T, t0, M)
