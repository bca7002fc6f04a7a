"""Closed-form diffusion statistics and Poisson reception probabilities.

The concentration after an impulsive point release in unbounded 3-D space
uses the ``4 D t`` spreading term of the free-space Green's function.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .model import NetworkTopology, Scenario, TimingConfig

# Kernel entries below this fraction of one molecule are dropped when a
# finite memory window is requested.
MEMORY_TOL = 1e-12


def concentration(offset, t, n_a: float, diffusion: float):
    """Molecules per m^3 at ``offset`` (3-vector from the source, metres) after ``t`` seconds."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("concentration is only defined for t > 0")
    d2 = float(np.sum(np.square(offset)))
    out = n_a / (4 * np.pi * diffusion * t) ** 1.5 * np.exp(-d2 / (4 * diffusion * t))
    return out if out.ndim else float(out)


def p_ob(distance: float, t, volume: float, diffusion: float):
    """Probability that one released molecule is inside a distant receiver at time ``t``.

    Uses the uniform-concentration assumption, so it is only meaningful when
    the receiver is small compared with its distance to the source.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("observation probability is only defined for t > 0")
    out = volume / (4 * np.pi * diffusion * t) ** 1.5 * np.exp(-distance ** 2 / (4 * diffusion * t))
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


def p_self(t, radius: float, diffusion: float):
    """Probability that a molecule released at a sphere's centre is inside it at ``t``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("self-observation probability is only defined for t > 0")
    root = np.sqrt(diffusion * t)
    out = (special.erf(radius / (2 * root))
           - radius * np.exp(-radius ** 2 / (4 * diffusion * t)) / np.sqrt(np.pi * diffusion * t))
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ObservationKernel:
    """Per-sample observation probabilities from one emitter at one observer.

    ``table[lag, m-1]`` is the probability that a molecule released at the
    start of an interval is inside the observer at sample ``m`` of the
    interval ``lag`` intervals later.
    """

    emitter: int
    observer: int
    molecule: int
    table: np.ndarray

    @property
    def sums(self) -> np.ndarray:
        """``sum_m P_ob(lag T + t_m)`` for each lag."""
        return self.table.sum(axis=1)

    @property
    def memory(self) -> int:
        return self.table.shape[0]


def observation_kernel(topology: NetworkTopology, timing: TimingConfig, emitter: int,
                       observer: int, n_lags: int, truncate: bool = False) -> ObservationKernel:
    kind = topology.emit_type[emitter]
    if kind is None or topology.detect_type[observer] != kind:
        raise ValueError(f"node {observer} does not observe the molecules emitted by node {emitter}")
    diff = topology.molecules[kind].diffusion
    t = np.arange(n_lags)[:, None] * timing.T + timing.offsets[None, :]
    node = topology.nodes[observer]
    if emitter == observer:
        table = p_self(t, node.radius, diff)
    else:
        table = p_ob(topology.distance(emitter, observer), t, node.volume, diff)
    table = np.atleast_2d(table)
    if truncate:
        keep = np.nonzero(table.sum(axis=1) >= MEMORY_TOL)[0]
        table = table[: keep[-1] + 1] if keep.size else table[:1]
    return ObservationKernel(emitter, observer, kind, table)


def kernel_tables(scenario: Scenario, truncate: bool = False) -> dict[tuple[int, int], ObservationKernel]:
    """Kernels for every (emitter, observer) pair that share a molecule type."""
    topo = scenario.topology
    n_lags = scenario.schedule.K
    out = {}
    for obs in range(1, topo.q + 2):
        for em in topo.emitters_seen_by(obs):
            out[em, obs] = observation_kernel(topo, scenario.timing, em, obs, n_lags, truncate)
    return out


def _kernel_sums(kernel) -> np.ndarray:
    return kernel.sums if isinstance(kernel, ObservationKernel) else np.asarray(kernel, dtype=float)


def mean_observed(emit_sequence, kernel, j: int, n_a: float):
    """Expected molecule count summed over the M samples of interval ``j``.

    ``emit_sequence[..., i-1]`` is the bit sent in interval ``i``; leading
    axes are treated as a batch.  Bits past ``j`` are ignored.
    """
    seq = np.asarray(emit_sequence, dtype=float)
    sums = _kernel_sums(kernel)
    lags = j - np.arange(1, min(j, seq.shape[-1]) + 1)
    w = np.where(lags < sums.size, sums[np.minimum(lags, sums.size - 1)], 0.0)
    out = n_a * (seq[..., : lags.size] @ w)
    return out if np.ndim(out) else float(out)


def complete_signal_mean(scenario: Scenario, kernels, sequences, observer: int, j: int):
    """Mean of everything the observer sees in interval ``j`` from all same-type emitters.

    ``sequences`` maps node index to its interval-indexed transmit sequence.
    """
    total = 0.0
    for em in scenario.topology.emitters_seen_by(observer):
        if em in sequences:
            n_a = scenario.protocol.n_molecules[em]
            total = total + mean_observed(sequences[em], kernels[em, observer], j, n_a)
    return total


def poisson_cdf(xi, mean):
    """``Pr(X < xi)`` for ``X ~ Poisson(mean)``.

    A real threshold is handled as ``ceil(xi)`` since the count is an
    integer.  Terms follow the ratio recursion ``t_w = t_{w-1} mean / w``
    carried in log space, so large means neither overflow nor underflow.
    """
    xi = np.ceil(np.asarray(xi, dtype=float))
    mean = np.asarray(mean, dtype=float)
    if np.any(xi < 1):
        raise ValueError("threshold must be at least 1")
    if np.any(mean < 0):
        raise ValueError("Poisson mean must be non-negative")
    xi, mean = np.broadcast_arrays(xi, mean)
    n_terms = int(xi.max()) if xi.size else 1
    w = np.arange(n_terms, dtype=float)
    with np.errstate(divide="ignore"):
        log_mean = np.log(mean)[..., None]
    step = np.where(w > 0, log_mean - np.log(np.maximum(w, 1.0)), 0.0)
    step = np.where((w > 0) & (mean[..., None] == 0), -np.inf, step)
    log_terms = np.cumsum(step, axis=-1) - mean[..., None]
    log_terms = np.where(w < xi[..., None], log_terms, -np.inf)
    out = np.exp(special.logsumexp(log_terms, axis=-1))
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


def poisson_cdf_gamma(s, mean):
    """Regularized upper incomplete gamma ``Q(ceil(s), mean)``."""
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ValueError("gamma form needs s > 0")
    out = special.gammaincc(np.ceil(s), np.asarray(mean, dtype=float))
    return out if np.ndim(out) else float(out)


def _stirling_integrand(u: float, mean: float) -> float:
    # after w = u^2 the w^{-1/2} endpoint singularity cancels against dw = 2u du
    if u == 0.0:
        return math.sqrt(2 / math.pi) * math.exp(-mean)
    w = u * u
    log_f = w - mean + w * math.log(mean) - 2 * w * math.log(u)
    return math.sqrt(2 / math.pi) * math.exp(log_f)


def poisson_cdf_stirling(xi: float, mean: float, rtol: float = 1e-8) -> float:
    """Continuous CDF obtained by replacing ``w!`` with Stirling's formula and integrating over w.

    Stirling's formula undershoots small factorials, so the total mass is a
    little above one (about 1.01 for a mean of 10); values are not clipped.
    """
    if not (xi >= 0 and mean > 0):
        raise ValueError("Stirling CDF needs xi >= 0 and mean > 0")
    if xi == 0:
        return 0.0
    upper = math.sqrt(xi)
    # split at the peak w = mean so quad sees the bulk of the mass
    pts = [math.sqrt(mean)] if 0 < math.sqrt(mean) < upper else None
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(_stirling_integrand, 0.0, upper, args=(mean,),
                                      epsabs=0.0, epsrel=rtol, limit=200, points=pts)
        except integrate.IntegrationWarning as exc:
            raise RuntimeError(f"Stirling CDF quadrature did not converge "
                               f"(xi={xi}, mean={mean}): {exc}") from exc
    return val
