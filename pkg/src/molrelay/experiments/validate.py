"""Quick invariant checks runnable from the command line (``molrelay validate``)."""

from __future__ import annotations

import math

import numpy as np
from scipy import stats

from .. import kernels
from ..analysis import expected_network_error, network_error, xor_cascade
from ..channel import p_ob, p_self, poisson_cdf, poisson_cdf_gamma, poisson_cdf_stirling
from ..model import (DEFAULT_DIFFUSION, DEFAULT_RADIUS, make_scenario, make_schedule,
                     split_budget_evenly)
from ..optimizer import optimal_na


def _cdf_forms_agree():
    s = np.arange(1, 80)
    means = np.linspace(0.1, 60.0, 37)
    a = poisson_cdf(s[:, None], means[None, :])
    b = poisson_cdf_gamma(s[:, None], means[None, :])
    return float(np.max(np.abs(a - b))) <= 1e-10


def _cdf_matches_pmf_sum():
    s, mean = 17, 12.3
    return abs(poisson_cdf(s, mean) - stats.poisson.cdf(s - 1, mean)) <= 1e-12


def _stirling_close():
    # the continuous form sits about half a count above the sum, so it is
    # only this close once the pmf peak is low (means of about 20 and up)
    worst = 0.0
    for mean in (20.0, 35.0, 50.0):
        for xi in (1, 3, int(mean), int(mean) + 4):
            worst = max(worst, abs(poisson_cdf_stirling(xi, mean) - poisson_cdf(xi, mean)))
    return worst <= 0.05


def _self_observation_limits():
    t = np.geomspace(1e-9, 1e-2, 60)
    p = p_self(t, DEFAULT_RADIUS, DEFAULT_DIFFUSION)
    return bool(p[0] > 1 - 1e-9 and np.all(np.diff(p) <= 0) and p[-1] < p[0]
                and np.all((p >= 0) & (p <= 1)))


def _observation_bounded():
    t = np.geomspace(1e-7, 1e-2, 50)
    p = p_ob(250e-9, t, 4 / 3 * math.pi * DEFAULT_RADIUS ** 3, DEFAULT_DIFFUSION)
    return bool(np.all((p >= 0) & (p <= 1)))


def _xor_cascade():
    eps = 0.07
    return abs(xor_cascade(eps, 5) - 0.5 * (1 - (1 - 2 * eps) ** 5)) <= 1e-12


def _budget_split():
    return all(sum(split_budget_evenly(20000, q + 1)) == 20000 for q in range(8))


def _schedule_lengths():
    return (make_schedule("FD", 50, 3).K == 53) and (make_schedule("HD", 50, 3).K == 102)


def _errors_are_probabilities():
    prof = network_error(make_scenario("SM-MH", "FD-A-BI-SI", 2), 4, 0)
    vals = np.concatenate([np.ravel(c) for c in prof.cond1[1:] + prof.cond0[1:]])
    return bool(np.all((vals >= 0) & (vals <= 1)))


def _relays_help_mm():
    e0, _ = expected_network_error(make_scenario("MM-MH", "FD", 0, T=400e-6, xi=12), 20, 0)
    e2, _ = expected_network_error(make_scenario("MM-MH", "FD", 2, T=400e-6, xi=17), 20, 0)
    return e2 < e0


def _na_scales_with_xi():
    sums = np.array([0.01, 0.002, 0.001])
    hist = np.ones(4)
    base = 2 * optimal_na(5, 10, hist, sums)
    return abs(optimal_na(5, 20, hist, sums) - base) <= 1


def _backends_agree():
    if "compiled" not in kernels.BACKENDS:
        return True
    out = []
    for name in ("compiled", "python"):
        rng = np.random.default_rng(5)
        buf = np.zeros((2, 30), dtype=np.int64)
        kernels.BACKENDS[name](rng, buf, np.array([0.0, 300e-9]), np.array([45e-9, 45e-9]),
                               500, 0, DEFAULT_DIFFUSION, 200e-6, 20e-6, 10)
        out.append(buf)
    return bool(np.array_equal(out[0], out[1]))


CHECKS = [
    ("Poisson CDF sum form equals the incomplete-gamma form", _cdf_forms_agree),
    ("Poisson CDF equals the summed pmf", _cdf_matches_pmf_sum),
    ("Stirling CDF within 0.05 of exact for means >= 20", _stirling_close),
    ("self-observation starts at 1 and decays", _self_observation_limits),
    ("observation probability lies in [0, 1]", _observation_bounded),
    ("XOR cascade closed form", _xor_cascade),
    ("budget split preserves the total", _budget_split),
    ("schedule lengths L+Q and 2L+Q-1", _schedule_lengths),
    ("analytical errors are probabilities", _errors_are_probabilities),
    ("relays help with distinct molecule types", _relays_help_mm),
    ("optimal emission count doubles with the threshold", _na_scales_with_xi),
    ("compiled and Python molecule kernels agree", _backends_agree),
]


def run_checks(echo=print) -> bool:
    ok = True
    for name, fn in CHECKS:
        try:
            passed = bool(fn())
        except Exception as exc:
            passed = False
            name = f"{name} ({exc})"
        ok &= passed
        echo(f"{'PASS' if passed else 'FAIL'}  {name}")
    return ok
