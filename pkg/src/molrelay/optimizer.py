"""Closed-form single-link optimum of the emission count and of the threshold.

For one link the Poisson means under bit 0 and bit 1 are ``m0 = N s`` and
``m1 = N (s + k0)`` with ``s`` the history-weighted kernel sum and ``k0``
the current-interval sum, so their ratio does not depend on ``N``.  Setting
the derivative of the link error to zero then gives

    N_opt  = [ln(P1/P0) + xi ln(m1/m0)] / k0
    xi_opt = [ln(P0/P1) + N k0] / ln(m1/m0)

without a fixed-point iteration.  Without interference (``m0 = 0``) the
log ratio diverges and the optimum is found by exhaustive search instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .analysis import J_ENUM, N_MC_HISTORIES, _history_sample

PARAMETERS = ("na", "xi")
XI_RANGE = (1, 100)
NA_RANGE = (100, 50000)
ROUNDINGS = ("nearest", "ceil")


def round_half_away(x) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def _round_xi(x, rounding: str) -> int:
    """Integer threshold from the continuous optimum, clamped to >= 1.

    ``nearest`` is the design rule.  A detector that decides 1 on counts
    >= xi gains from including count n exactly when n lies above the
    continuous crossing point, so ``ceil`` gives the best integer; the
    nearest integer is one too low about half of the time.
    """
    if rounding not in ROUNDINGS:
        raise ValueError(f"rounding must be one of {ROUNDINGS}")
    return max(1, round_half_away(x) if rounding == "nearest" else math.ceil(x))


@dataclass(frozen=True)
class LinkOptimizationInput:
    """Kernel sums of one link plus the priors; ``sums[0]`` is the current interval."""

    sums: np.ndarray
    p1: float = 0.5

    def ratio(self, history, j: int):
        """``m1/m0`` for bit ``j`` given earlier bits (``inf`` without interference)."""
        isi = self.isi(history, j)
        k0 = float(self.sums[0])
        with np.errstate(divide="ignore"):
            return np.where(isi > 0, (isi + k0) / np.where(isi > 0, isi, 1.0), np.inf)

    def isi(self, history, j: int):
        sums = np.asarray(self.sums, dtype=float)
        hist = np.asarray(history, dtype=float)[..., : j - 1]
        if j <= 1:
            return np.zeros(hist.shape[:-1]) if hist.ndim > 1 else 0.0
        lags = j - np.arange(1, j)
        w = np.where(lags < sums.size, sums[np.minimum(lags, sums.size - 1)], 0.0)
        return hist @ w


def na_formula(xi, ratio, k0: float, p1: float = 0.5):
    """Unrounded optimal emission count."""
    return (np.log(p1 / (1.0 - p1)) + xi * np.log(ratio)) / k0


def xi_formula(n_a, ratio, k0: float, p1: float = 0.5):
    """Unrounded optimal threshold."""
    return (np.log((1.0 - p1) / p1) + n_a * k0) / np.log(ratio)


def _link_error_grid(n_a, xi, isi, k0, weights, p1):
    """Weighted link error for every pair of (n_a, xi) rows against history columns."""
    n_a = np.asarray(n_a, dtype=float)[:, None]
    xi = np.ceil(np.asarray(xi, dtype=float))[:, None]
    m0 = n_a * isi[None, :]
    m1 = n_a * (isi[None, :] + k0)
    miss = special.gammaincc(xi, m1)
    fa = 1.0 - special.gammaincc(xi, m0)
    return (p1 * miss + (1.0 - p1) * fa) @ weights


@dataclass(frozen=True)
class HistoryTable:
    """Every (bit position, earlier bits) case of a link, flattened.

    ``isi`` is the interference kernel sum per case (multiply by N for the
    mean) and ``weight`` sums to one over all cases, each bit position
    carrying ``1/length``.
    """

    j: np.ndarray
    isi: np.ndarray
    weight: np.ndarray
    k0: float


def history_table(sums, length: int, p1: float = 0.5, j_enum: int = J_ENUM,
                  n_mc: int = N_MC_HISTORIES, seed: int = 0) -> HistoryTable:
    """Histories up to ``j_enum`` bits are enumerated; longer ones share one MC sample."""
    lin = LinkOptimizationInput(np.asarray(sums, dtype=float), p1)
    rng = np.random.default_rng(seed)
    mc = (rng.random((n_mc, length)) < p1).astype(float)
    js, isis, ws = [], [], []
    for j in range(1, length + 1):
        if j - 1 <= j_enum:
            hist, weights = _history_sample(j, p1, j_enum, n_mc, rng)
        else:
            hist, weights = mc[:, : j - 1], np.full(n_mc, 1.0 / n_mc)
        isi = np.atleast_1d(lin.isi(hist, j)) if j > 1 else np.zeros(1)
        js.append(np.full(isi.size, j))
        isis.append(isi)
        ws.append(weights / length)
    return HistoryTable(np.concatenate(js), np.concatenate(isis), np.concatenate(ws),
                        float(lin.sums[0]))


def link_error_curve(sums, n_a, xi, length: int, p1: float = 0.5, j_enum: int = J_ENUM,
                     n_mc: int = N_MC_HISTORIES, seed: int = 0) -> np.ndarray:
    """Expected single-link error over bit positions 1..length for each (n_a, xi) pair.

    ``n_a`` and ``xi`` broadcast against each other.  Histories past
    ``j_enum`` are one shared Monte Carlo sample, so every grid point is
    evaluated on common random numbers.
    """
    n_a, xi = np.broadcast_arrays(np.atleast_1d(np.asarray(n_a, dtype=float)),
                                  np.atleast_1d(np.asarray(xi, dtype=float)))
    tab = history_table(sums, length, p1, j_enum, n_mc, seed)
    return _link_error_grid(n_a, xi, tab.isi, tab.k0, tab.weight, p1)


def conditional_link_error(n_a, xi, isi, k0: float, p1: float = 0.5):
    """Elementwise link error of single cases (no averaging)."""
    xi = np.ceil(np.asarray(xi, dtype=float))
    m0 = np.asarray(n_a, dtype=float) * isi
    miss = special.gammaincc(xi, m0 + np.asarray(n_a, dtype=float) * k0)
    fa = 1.0 - special.gammaincc(xi, m0)
    return p1 * miss + (1.0 - p1) * fa


def per_history_optima(parameter: str, table: HistoryTable, fixed: float, p1: float = 0.5,
                       grid=None, rounding: str = "nearest") -> np.ndarray:
    """Closed-form optimum of every case, as returned by optimal_na / optimal_xi.

    Cases without interference get the grid minimum instead (``grid``
    defaults to the full search range of the parameter).
    """
    if parameter not in PARAMETERS:
        raise ValueError(f"parameter must be one of {PARAMETERS}")
    isi, k0 = table.isi, table.k0
    ok = isi > 0
    out = np.empty(isi.size)
    ratio = (isi[ok] + k0) / isi[ok]
    if parameter == "na":
        out[ok] = [round_half_away(v) for v in na_formula(fixed, ratio, k0, p1)]
    else:
        out[ok] = [_round_xi(v, rounding) for v in xi_formula(fixed, ratio, k0, p1)]
    if np.any(~ok):
        lo, hi = NA_RANGE if parameter == "na" else XI_RANGE
        g = np.arange(lo, hi + 1) if grid is None else np.asarray(grid)
        if parameter == "na":
            err = _link_error_grid(g, np.full(g.size, fixed), np.zeros(1), k0, np.ones(1), p1)
        else:
            err = _link_error_grid(np.full(g.size, fixed), g, np.zeros(1), k0, np.ones(1), p1)
        out[~ok] = g[int(np.argmin(err))]
    return out


def per_history_grid_min(parameter: str, table: HistoryTable, fixed: float, grid,
                         p1: float = 0.5, block: int = 2048) -> np.ndarray:
    """Exhaustive minimum error of every case over ``grid``."""
    if parameter not in PARAMETERS:
        raise ValueError(f"parameter must be one of {PARAMETERS}")
    g = np.asarray(grid, dtype=float)[:, None]
    out = np.empty(table.isi.size)
    for a in range(0, table.isi.size, block):
        isi = table.isi[None, a: a + block]
        if parameter == "na":
            err = conditional_link_error(g, fixed, isi, table.k0, p1)
        else:
            err = conditional_link_error(fixed, g, isi, table.k0, p1)
        out[a: a + block] = err.min(axis=0)
    return out


def formula_fidelity(parameter: str, sums, fixed: float, length: int, grid, p1: float = 0.5,
                     j_enum: int = J_ENUM, n_mc: int = N_MC_HISTORIES, seed: int = 0,
                     interference_only: bool = True,
                     rounding: str = "nearest") -> tuple[float, float]:
    """Expected link error when every case uses its closed-form optimum, and the
    same expectation with every case at its own grid minimum.

    With ``interference_only`` the cases without interference (where both
    sides use the grid search and agree by construction) are left out.
    """
    tab = history_table(sums, length, p1, j_enum, n_mc, seed)
    opt = per_history_optima(parameter, tab, fixed, p1, grid, rounding)
    if parameter == "na":
        err = conditional_link_error(opt, fixed, tab.isi, tab.k0, p1)
    else:
        err = conditional_link_error(fixed, opt, tab.isi, tab.k0, p1)
    best = per_history_grid_min(parameter, tab, fixed, grid, p1)
    w = tab.weight * (tab.isi > 0) if interference_only else tab.weight
    return float(w @ err) / float(w.sum()), float(w @ best) / float(w.sum())


def optimal_na(j: int, xi: float, history, sums, p1: float = 0.5,
               search: tuple[int, int] = NA_RANGE) -> int:
    """Optimal emission count for bit ``j`` given earlier bits."""
    lin = LinkOptimizationInput(np.asarray(sums, dtype=float), p1)
    ratio = float(lin.ratio(history, j))
    if not np.isfinite(ratio):
        grid = np.arange(search[0], search[1] + 1)
        isi = np.atleast_1d(lin.isi(np.asarray(history)[None, :], j)) if j > 1 else np.zeros(1)
        err = _link_error_grid(grid, np.full(grid.size, xi), isi, float(lin.sums[0]), np.ones(1), p1)
        return int(grid[int(np.argmin(err))])
    return round_half_away(na_formula(xi, ratio, float(lin.sums[0]), p1))


def optimal_xi(j: int, n_a: float, history, sums, p1: float = 0.5,
               search: tuple[int, int] = XI_RANGE, rounding: str = "nearest") -> int:
    """Optimal detection threshold (>= 1) for bit ``j`` given earlier bits."""
    lin = LinkOptimizationInput(np.asarray(sums, dtype=float), p1)
    ratio = float(lin.ratio(history, j))
    if not np.isfinite(ratio):
        grid = np.arange(search[0], search[1] + 1)
        isi = np.atleast_1d(lin.isi(np.asarray(history)[None, :], j)) if j > 1 else np.zeros(1)
        err = _link_error_grid(np.full(grid.size, n_a), grid, isi, float(lin.sums[0]), np.ones(1), p1)
        return int(grid[int(np.argmin(err))])
    return _round_xi(xi_formula(n_a, ratio, float(lin.sums[0]), p1), rounding)


def average_optimal(parameter: str, sums, fixed: float, length: int, p1: float = 0.5,
                    j_enum: int = J_ENUM, n_mc: int = N_MC_HISTORIES, seed: int = 0) -> float:
    """Mean of the unrounded per-(bit, history) optima over bits 1..length.

    ``fixed`` is the threshold when optimizing the emission count and the
    emission count when optimizing the threshold.  Cases without any
    interference have an unbounded optimum and are left out of the mean.
    """
    if parameter not in PARAMETERS:
        raise ValueError(f"parameter must be one of {PARAMETERS}")
    tab = history_table(sums, length, p1, j_enum, n_mc, seed)
    ok = tab.isi > 0
    if not np.any(ok):
        raise ValueError("no interference in any interval; the optimum is unbounded")
    ratio = (tab.isi[ok] + tab.k0) / tab.isi[ok]
    if parameter == "na":
        vals = na_formula(fixed, ratio, tab.k0, p1)
    else:
        vals = xi_formula(fixed, ratio, tab.k0, p1)
    w = tab.weight[ok]
    return float(w @ vals) / float(w.sum())


def brute_force_opt(evaluate, grid) -> tuple[float, float]:
    """Exhaustive minimum of ``evaluate`` over ``grid``; ties go to the smaller value.

    ``evaluate`` maps the whole grid array to an array of errors.
    """
    grid = np.asarray(grid)
    if grid.size == 0:
        raise ValueError("empty search range")
    order = np.argsort(grid, kind="stable")
    grid = grid[order]
    err = np.asarray(evaluate(grid), dtype=float)
    k = int(np.argmin(err))
    return grid[k].item(), float(err[k])


def brute_force_link(parameter: str, grid, sums, fixed: float, length: int, p1: float = 0.5,
                     seed: int = 0) -> tuple[float, float]:
    """Grid search of the expected single-link error over N_A or xi."""
    if parameter not in PARAMETERS:
        raise ValueError(f"parameter must be one of {PARAMETERS}")

    def evaluate(g):
        if parameter == "na":
            return link_error_curve(sums, g, fixed, length, p1, seed=seed)
        return link_error_curve(sums, fixed, g, length, p1, seed=seed)

    return brute_force_opt(evaluate, grid)
