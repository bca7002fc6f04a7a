import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from molrelay.channel import kernel_tables, observation_kernel, p_ob, p_self
from molrelay.detection import (DetectionState, ThresholdKind, ThresholdPolicy, bi_offset,
                                make_threshold_rules, policy_for, si_offset, threshold_bi,
                                threshold_fd_si_bi, threshold_hd_bi, threshold_si,
                                weighted_sum_decide)
from molrelay.model import TimingConfig, build_topology, make_scenario

T, M, T0 = 200e-6, 10, 20e-6
TIMING = TimingConfig(T, M, T0)
TOPO = build_topology(1e-6, 3, scheme="SM-MH")
V = TOPO.nodes[1].volume
D = 4.365e-10
NEXT = observation_kernel(TOPO, TIMING, 2, 1, 40)   # R2 -> R1
SELF = observation_kernel(TOPO, TIMING, 1, 1, 40)   # R1 -> R1
OFFS = T0 * np.arange(1, M + 1)


def test_weighted_sum_decide():
    assert weighted_sum_decide([3, 4], 5) == 1
    assert weighted_sum_decide([1, 3], 5) == 0
    assert weighted_sum_decide([2, 3], 5) == 1
    with pytest.raises(ValueError):
        weighted_sum_decide([], 1)


def test_detection_state():
    st_ = DetectionState(1, 5)
    st_.record(2, 1, 11.5)
    assert st_.history.tolist() == [0, 1, 0, 0, 0] and st_.threshold == 11.5
    with pytest.raises(ValueError):
        st_.record(3, 2, 10)


def test_policies_at_chain_end():
    q = 3
    assert policy_for("FD-A", 1, q, 10).kind is ThresholdKind.BI
    assert policy_for("FD-A", q, q, 10).kind is ThresholdKind.FIXED
    assert policy_for("FD-A-BI-SI", q, q, 10).kind is ThresholdKind.SI
    assert policy_for("HD-A-BI", q, q, 10).kind is ThresholdKind.FIXED
    for name in ("FD", "FD-A", "FD-A-SI", "HD", "FD-A-BI-SI", "HD-A-BI"):
        assert policy_for(name, q + 1, q, 10).kind is ThresholdKind.FIXED
    with pytest.raises(ValueError):
        ThresholdPolicy(ThresholdKind.FIXED, 0.5)
    with pytest.raises(ValueError):
        policy_for("FD", 0, q, 10)


def test_bi_examples_literal_lags():
    j = 9
    h = np.zeros(j)
    assert threshold_bi(1, 3, j, h, NEXT, 5000, 10, "literal") == 10
    assert threshold_bi(1, 3, 2, np.ones(3), NEXT, 5000, 10, "literal") == 10
    h[j - 3] = 1   # decision of interval j-2
    expect = 10 + 5000 * p_ob(250e-9, 2 * T + OFFS, V, D).sum()
    assert threshold_bi(1, 3, j, h, NEXT, 5000, 10, "literal") == pytest.approx(expect, rel=1e-13)


def test_bi_emission_lag_is_physical():
    # R2 re-sends the decision of interval j-2 at the start of interval j
    j = 9
    h = np.zeros(j)
    h[j - 3] = 1
    expect = 10 + 5000 * p_ob(250e-9, OFFS, V, D).sum()
    assert threshold_bi(1, 3, j, h, NEXT, 5000, 10) == pytest.approx(expect, rel=1e-13)
    # the current and previous decisions are not yet re-sent by R2
    h2 = np.zeros(j)
    h2[j - 2:] = 1
    assert threshold_bi(1, 3, j, h2, NEXT, 5000, 10) == 10


def test_bi_rejected_at_last_relay():
    with pytest.raises(ValueError):
        threshold_bi(3, 3, 5, np.zeros(5), NEXT, 5000, 10)
    with pytest.raises(ValueError):
        threshold_bi(4, 3, 5, np.zeros(5), NEXT, 5000, 10)


def test_si_examples():
    j = 6
    h = np.zeros(j)
    assert threshold_si(j, h, SELF, 5000, 10) == 10
    h[j - 2] = 1   # decision of interval j-1
    lit = 10 + 5000 * p_self(T + OFFS, 45e-9, D).sum()
    assert threshold_si(j, h, SELF, 5000, 10, "literal") == pytest.approx(lit, rel=1e-13)
    emi = 10 + 5000 * p_self(OFFS, 45e-9, D).sum()
    assert threshold_si(j, h, SELF, 5000, 10) == pytest.approx(emi, rel=1e-13)


@given(st.lists(st.integers(0, 1), min_size=15, max_size=15), st.integers(1, 15),
       st.integers(0, 14), st.sampled_from(["emission", "literal"]))
def test_si_monotone_in_history(bits, j, extra, alignment):
    h = np.array(bits)
    more = h.copy()
    more[extra] = 1
    assert threshold_si(j, more, SELF, 5000, 10, alignment) >= threshold_si(j, h, SELF, 5000, 10,
                                                                            alignment)


def test_fd_si_bi_structure():
    rng = np.random.default_rng(4)
    h = rng.integers(0, 2, 20)
    j = 17
    tot = threshold_fd_si_bi(1, 3, j, h, SELF, NEXT, 5000, 4000, 10)
    parts = si_offset(j, h, SELF, 5000) + bi_offset(j, h, NEXT, 4000)
    assert tot - 10 == pytest.approx(parts, rel=1e-13)
    assert threshold_fd_si_bi(3, 3, j, h, SELF, NEXT, 5000, 4000, 10) == pytest.approx(
        threshold_si(j, h, SELF, 5000, 10), rel=1e-15)
    assert threshold_fd_si_bi(1, 3, j, np.zeros(20), SELF, NEXT, 5000, 4000, 10) == 10


@given(st.lists(st.integers(0, 1), min_size=20, max_size=20), st.integers(1, 20))
def test_threshold_ordering_property(bits, j):
    h = np.array(bits)
    joint = threshold_fd_si_bi(1, 3, j, h, SELF, NEXT, 5000, 4000, 10)
    si = threshold_si(j, h, SELF, 5000, 10)
    assert joint >= si >= 10
    relevant = h[: max(0, min(j - 1, h.size))]
    assert (si == 10) == (not relevant.any())


def test_hd_bi():
    h = np.zeros(12)
    assert threshold_hd_bi(1, 3, 7, h, NEXT, 5000, 10) == 10
    with pytest.raises(ValueError):
        threshold_hd_bi(2, 3, 7, h, NEXT, 5000, 10)
    h[4] = 1
    assert threshold_hd_bi(1, 3, 7, h, NEXT, 5000, 10) == pytest.approx(
        10 + bi_offset(7, h, NEXT, 5000), rel=1e-15)
    # the last relay keeps a fixed threshold and nothing self-related is ever added
    assert threshold_hd_bi(3, 3, 7, np.ones(12), NEXT, 5000, 10) == 10


def test_rules_follow_protocols():
    sc = make_scenario("SM-MH", "FD-A-BI-SI", 3, length=10)
    rules = make_threshold_rules(sc, kernel_tables(sc))
    h = np.ones(sc.schedule.K)
    assert rules[4](8, h) == sc.protocol.xi
    assert rules[3].policy.kind is ThresholdKind.SI
    assert rules[1](8, h) > rules[3](8, h) - 1e9  # well defined
    fixed = make_scenario("SM-MH", "FD", 3, length=10)
    frules = make_threshold_rules(fixed, kernel_tables(fixed))
    for k in range(1, 5):
        assert frules[k](8, h) == fixed.protocol.xi
        assert float(frules[k](8, h)).is_integer()


def test_rules_are_deterministic():
    sc = make_scenario("2M-MH", "FD-A", 3, length=10)
    rules = make_threshold_rules(sc, kernel_tables(sc))
    h = np.random.default_rng(0).integers(0, 2, sc.schedule.K)
    assert rules[1](9, h) == rules[1](9, h.copy())
    batch = np.stack([h, h])
    np.testing.assert_array_equal(rules[1].offset(9, batch), [rules[1].offset(9, h)] * 2)
