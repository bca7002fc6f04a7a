import numpy as np
import pytest

from molrelay import _fallback, kernels
from molrelay.channel import observation_kernel, p_self
from molrelay.model import DEFAULT_DIFFUSION, make_scenario
from molrelay.simulator import (ErrorEstimate, ParticleStore, brownian_step, estimate_error,
                                release, run_trial, sample_count, simulate_errors, trial_rng)
from molrelay.simulator.engine import _slot_contributions

D = DEFAULT_DIFFUSION


def _counts(fn, seed, dist, n_mol=400, K=20, M=10):
    rng = np.random.default_rng(seed)
    buf = np.zeros((len(dist), K * M), dtype=np.int64)
    fn(rng, buf, np.asarray(dist, dtype=float), np.full(len(dist), 45e-9), n_mol, 2, D,
       200e-6, 20e-6, M)
    return buf


@pytest.mark.skipif("compiled" not in kernels.BACKENDS, reason="extension not built")
def test_backends_give_identical_counts():
    for seed in range(3):
        a = _counts(kernels.BACKENDS["compiled"], seed, [0.0, 300e-9, 1e-6])
        b = _counts(_fallback.radial_counts, seed, [0.0, 300e-9, 1e-6])
        np.testing.assert_array_equal(a, b)


def test_counts_start_at_emission_interval():
    buf = _counts(kernels.radial_counts, 0, [0.0, 300e-9])
    assert not buf[:, :20].any() and buf[0, 20] > 0


def test_self_counts_follow_self_observation():
    n, trials = 2000, 40
    first = np.zeros(10)
    for s in range(trials):
        first += _counts(kernels.radial_counts, s, [0.0], n_mol=n, K=3)[0, 20:30]
    expect = n * p_self(20e-6 * np.arange(1, 11), 45e-9, D)
    se = np.sqrt(expect * trials)
    assert np.all(np.abs(first - trials * expect) < 5 * se)


def test_direct_link_mean_counts():
    sc = make_scenario("SM-MH", "FD", 0, x_d=500e-9, T=200e-6, n_total=5000, length=8)
    sums = observation_kernel(sc.topology, sc.timing, 0, 1, sc.schedule.K).sums
    src = np.ones(8, dtype=np.int8)
    total = np.zeros(sc.schedule.K)
    trials = 60
    for t in range(trials):
        obs, table = _slot_contributions(sc, trial_rng(3, t), src, kernels.radial_counts)[0]
        total += table[:, obs.index(1)].sum(axis=0)
    expect = 5000 * np.cumsum(sums[: sc.schedule.K])
    se = np.sqrt(expect * trials)
    assert np.all(np.abs(total - trials * expect) < 4 * se + 0.03 * trials * expect)


def test_trial_is_reproducible():
    sc = make_scenario("MM-MH", "FD", 1, length=10)
    a, b = run_trial(sc, (5, 2)), run_trial(sc, (5, 2))
    np.testing.assert_array_equal(a.detected, b.detected)
    assert a.seed == (5, 2)


def test_genie_has_no_errors():
    sc = make_scenario("SM-MH", "HD", 2, length=10)
    res = run_trial(sc, (0, 0), genie=True)
    assert not res.node_errors.any()


def test_threshold_grid_replays_own_threshold():
    sc = make_scenario("MM-MH", "FD", 1, length=12, xi=9)
    grid = run_trial(sc, (1, 4), xis=[5, 9, 14])
    own = run_trial(sc, (1, 4))
    np.testing.assert_array_equal(grid.detected[1], own.detected[0])
    with pytest.raises(ValueError):
        run_trial(sc, (1, 4), xis=[0.5])
    with pytest.raises(ValueError):
        run_trial(sc, (1, 4), engine="walk")


def test_worker_count_does_not_change_results():
    sc = make_scenario("MM-MH", "FD", 1, length=10)
    a = simulate_errors(sc, 12, 9, workers=1, chunk=5)
    b = simulate_errors(sc, 12, 9, workers=2, chunk=5)
    np.testing.assert_array_equal(a, b)
    with pytest.raises(ValueError):
        simulate_errors(sc, 0)


def test_estimate_error():
    est = ErrorEstimate(10, 25, 500)
    assert est.rate == 0.05 and est.se == pytest.approx(np.sqrt(0.05 * 0.95 / 500))
    sc = make_scenario("MM-MH", "FD", 0, length=10)
    ests = estimate_error(sc, 4, 0, xis=[5, 10])
    assert len(ests) == 2 and all(e.n_bits == 40 for e in ests)


def test_particle_engine_matches_radial_engine():
    sc = make_scenario("MM-MH", "FD", 0, x_d=300e-9, T=200e-6, M=5, xi=4, n_total=600, length=6)
    part = estimate_error(sc, 80, 0, engine="particle")
    rad = estimate_error(sc, 400, 0)
    assert abs(part.rate - rad.rate) < 4 * np.hypot(part.se, rad.se) + 0.01
    with pytest.raises(ValueError):
        run_trial(sc, (0, 0), xis=[3, 4], engine="particle")


def test_particle_primitives():
    store = ParticleStore()
    release(store, (0, 0, 0), 0, 5)
    release(store, (1e-6, 0, 0), 1, 3)
    assert store.count() == 8 and store.count(0) == 5 and store.released[1] == 3
    assert sample_count(store, (0, 0, 0), 45e-9, 0) == 5
    brownian_step(store, 1e-3, {0: D, 1: D}, np.random.default_rng(0))
    assert sample_count(store, (0, 0, 0), 45e-9, 0) < 5
    with pytest.raises(ValueError):
        release(store, (0, 0, 0), 0, -1)
    with pytest.raises(ValueError):
        brownian_step(store, 0.0, {0: D}, np.random.default_rng(0))
