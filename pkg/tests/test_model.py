import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from molrelay.model import (PROTOCOLS, ProtocolConfig, Scheme, SourceModel, TimingConfig,
                            build_topology, generate_source_bits, make_scenario, make_schedule,
                            pad_sequence, split_budget_evenly)


def test_relays_equally_spaced():
    topo = build_topology(1e-6, 3)
    xs = [n.position[0] for n in topo.nodes]
    np.testing.assert_allclose(xs, [0, 250e-9, 500e-9, 750e-9, 1e-6], rtol=0, atol=1e-18)
    assert topo.destination == 4
    assert all(n.position[1] == 0 and n.position[2] == 0 for n in topo.nodes)


def test_volume():
    topo = build_topology(1e-6, 1, radii=45e-9)
    assert topo.nodes[1].volume == pytest.approx(4 / 3 * math.pi * 45e-9 ** 3, rel=1e-15)


def test_baseline_topology():
    topo = build_topology(1e-6, 0)
    assert len(topo.nodes) == 2
    assert topo.detect_type == (None, 1)
    assert topo.emitters_seen_by(1) == [0]


def test_molecule_assignment():
    mm = build_topology(1e-6, 3, scheme="MM-MH")
    assert mm.detect_type == (None, 1, 2, 3, 4)
    assert mm.emit_type == (1, 2, 3, 4, None)
    two = build_topology(1e-6, 3, scheme="2M-MH")
    assert two.emit_type[:4] == (1, 2, 1, 2)
    assert two.detect_type[1:] == (1, 2, 1, 2)
    sm = build_topology(1e-6, 4, scheme=Scheme.SM)
    assert set(sm.detect_type[1:]) == {1} and set(sm.emit_type[:-1]) == {1}


def test_interference_sets():
    sm = build_topology(1e-6, 3, scheme="SM-MH")
    assert sm.emitters_seen_by(2) == [0, 1, 2, 3]
    two = build_topology(1e-6, 3, scheme="2M-MH")
    # R_1 detects A1, which S and R_2 emit
    assert two.emitters_seen_by(1) == [0, 2]
    assert two.observers_of(1) == [2, 4]
    mm = build_topology(1e-6, 3)
    assert mm.emitters_seen_by(3) == [2]


@pytest.mark.parametrize("kwargs", [dict(x_d=0.0, q=1), dict(x_d=1e-6, q=-1),
                                    dict(x_d=1e-6, q=1, radii=0.0)])
def test_bad_geometry(kwargs):
    with pytest.raises(ValueError):
        build_topology(**kwargs)


@given(st.floats(1e-7, 1e-4), st.integers(0, 12))
def test_spacing_property(x_d, q):
    topo = build_topology(x_d, q)
    xs = np.array([n.position[0] for n in topo.nodes])
    assert np.max(np.abs(np.diff(xs) - x_d / (q + 1))) <= 1e-12 * x_d


def test_schedule_lengths():
    assert make_schedule("FD", 50, 2).K == 52
    assert make_schedule("HD", 50, 2).K == 101
    s = make_schedule("FD", 1, 0)
    assert s.K == 1 and s.emission_interval(0, 1) == 1


def test_pad_sequence_layouts():
    fd = make_schedule("FD", 2, 2)
    assert pad_sequence([1, 1], 1, fd).tolist() == [0, 1, 1, 0]
    hd = make_schedule("HD", 2, 2)
    assert pad_sequence([1, 1], 1, hd).tolist() == [0, 1, 0, 1, 0]
    assert not pad_sequence([0, 0], 2, hd).any()
    with pytest.raises(ValueError):
        pad_sequence([1, 1], 3, fd)


@given(st.integers(1, 30), st.integers(0, 6), st.data())
def test_fd_padding_property(length, q, data):
    sched = make_schedule("FD", length, q)
    k = data.draw(st.integers(0, q))
    bits = np.ones(length, dtype=np.int8)
    seq = pad_sequence(bits, k, sched)
    assert seq.sum() == length
    assert not seq[:k].any()
    assert not seq[k + length:].any()
    assert seq.size == length + q


@given(st.integers(1, 30), st.integers(1, 6))
def test_hd_parity_property(length, q):
    sched = make_schedule("HD", length, q)
    tx = sched.transmit_mask()
    for k in range(q + 1):
        slots = np.nonzero(tx[k])[0]
        # node k uses a single interval parity, opposite to its neighbours
        assert len({int(s) % 2 for s in slots}) == 1
        if k:
            assert (slots[0] - np.nonzero(tx[k - 1])[0][0]) % 2 == 1
    det = sched.detect_mask()
    for k in range(1, q + 1):
        # a relay never detects while it transmits
        assert not np.any(det[k] & tx[k])


def test_source_bits():
    assert not generate_source_bits(SourceModel(0.0, 20), np.random.default_rng(1)).any()
    assert generate_source_bits(SourceModel(1.0, 20), np.random.default_rng(1)).all()
    bits = generate_source_bits(SourceModel(0.5, 100000, seed=3))
    assert abs(bits.mean() - 0.5) <= 3 * math.sqrt(0.25 / 1e5)
    again = generate_source_bits(SourceModel(0.5, 100000, seed=3))
    assert np.array_equal(bits, again)


def test_timing():
    t = TimingConfig(200e-6, 10, 20e-6)
    np.testing.assert_allclose(t.offsets, np.arange(1, 11) * 20e-6)
    assert t.sample_time(3, 2) == pytest.approx(2 * 200e-6 + 40e-6)
    with pytest.raises(ValueError):
        TimingConfig(100e-6, 10, 20e-6)


def test_protocol_legality():
    for scheme, names in PROTOCOLS.items():
        for name in names:
            ProtocolConfig(scheme, name, 10, (1.0,))
    with pytest.raises(ValueError):
        ProtocolConfig(Scheme.MM, "HD", 10, (1.0,))
    with pytest.raises(ValueError):
        ProtocolConfig(Scheme.SM, "FD", 0.5, (1.0,))
    assert ProtocolConfig(Scheme.SM, "HD-A-BI", 10, (1.0,)).duplex.value == "HD"


@given(st.integers(1, 10 ** 6), st.integers(1, 12))
def test_budget_split_property(total, n):
    parts = split_budget_evenly(total, n)
    assert sum(parts) == total and max(parts) - min(parts) <= 1


def test_scenario_budget():
    sc = make_scenario("SM-MH", "HD-A-BI", 3, n_total=2e4)
    assert sum(sc.protocol.n_molecules) == 20000
    assert sc.schedule.K == 2 * 50 + 3 - 1
