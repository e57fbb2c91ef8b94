import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import JAMMING_CHANNEL, JAMMING_JAMMER, brute_force_graph
from wbnsim.errors import DegenerateDistanceWarning
from wbnsim.radio import (
    ChannelParams,
    Deployment,
    Fault,
    Jammer,
    Node,
    Role,
    coverage_set,
    flood_reach,
    link_matrix,
    link_ok,
    nodes_for_density,
    place_nodes,
    place_nodes_density,
    received_power,
)


def line_deployment(xs, power=0.0):
    nodes = tuple(Node(i, (float(x), 0.0), power) for i, x in enumerate(xs))
    return Deployment(nodes, max(abs(x) for x in xs) or 1.0)


class TestPlacement:
    def test_single_node_at_origin(self):
        dep = place_nodes(1, 100, seed=7)
        assert len(dep) == 1
        assert dep[0].position == (0.0, 0.0)
        assert dep[0].role is Role.LEADER

    def test_jamming_geometry_inside_disk(self):
        dep = place_nodes(300, 100, seed=42)
        pos = dep.positions()
        assert pos.shape == (300, 2)
        assert np.all(pos[:, 0] ** 2 + pos[:, 1] ** 2 <= 100.0**2)
        assert tuple(pos[0]) == (0.0, 0.0)
        assert sum(n.role is Role.LEADER for n in dep.nodes) == 1

    def test_deterministic(self):
        a = place_nodes(300, 100, seed=42).positions()
        b = place_nodes(300, 100, seed=42).positions()
        assert a.tobytes() == b.tobytes()
        c = place_nodes(300, 100, seed=43).positions()
        assert a.tobytes() != c.tobytes()

    @pytest.mark.parametrize("n,radius", [(0, 100), (5, 0), (5, -1)])
    def test_invalid(self, n, radius):
        with pytest.raises(ValueError):
            place_nodes(n, radius, seed=1)

    def test_area_uniform(self):
        # inner disk of half radius holds a quarter of the nodes
        pos = place_nodes(20001, 1.0, seed=3).positions()[1:]
        inner = np.mean(np.hypot(pos[:, 0], pos[:, 1]) <= 0.5)
        assert abs(inner - 0.25) < 0.015

    def test_density_mode(self):
        assert nodes_for_density(0.01, 100) == round(0.01 * math.pi * 1e4)
        assert len(place_nodes_density(0.01, 100, seed=1)) == 314
        sizes = {len(place_nodes_density(0.01, 100, seed=s, poisson=True)) for s in range(10)}
        assert len(sizes) > 1


class TestReceivedPower:
    def test_unit_distance(self):
        tx = Node(0, (0.0, 0.0), 20.0)
        assert received_power(tx, (1.0, 0.0), ChannelParams(reference_loss=0)) == pytest.approx(20.0)

    def test_gamma_2_5_at_10m(self):
        tx = Node(0, (0.0, 0.0), 20.0)
        ch = ChannelParams(pathloss_exponent=2.5, reference_loss=0)
        assert received_power(tx, (10.0, 0.0), ch) == pytest.approx(-5.0)

    def test_gamma_4_at_100m(self):
        tx = Node(0, (0.0, 0.0), 0.0)
        ch = ChannelParams(pathloss_exponent=4, reference_loss=0)
        assert received_power(tx, (0.0, 100.0), ch) == pytest.approx(-80.0)

    def test_reference_loss_subtracts(self):
        tx = Node(0, (0.0, 0.0), 0.0)
        assert received_power(tx, (10.0, 0.0), ChannelParams(reference_loss=40)) == pytest.approx(-80.0)

    def test_coincident_clamped_and_flagged(self):
        tx = Node(3, (5.0, 5.0), 10.0)
        with pytest.warns(DegenerateDistanceWarning):
            p = received_power(tx, (5.0, 5.0), ChannelParams())
        assert p == pytest.approx(10.0)

    def test_no_flag_below_one_metre_but_clamped(self):
        tx = Node(0, (0.0, 0.0), 10.0)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert received_power(tx, (0.5, 0.0), ChannelParams()) == pytest.approx(10.0)

    def test_bad_exponent_rejected(self):
        with pytest.raises(ValueError, match="pathloss_exponent must be > 0"):
            ChannelParams(pathloss_exponent=-1)


class TestLinkOk:
    def test_boundary_inclusive(self):
        tx, rx = Node(0, (0.0, 0.0), 0.0), Node(1, (100.0, 0.0), 0.0)
        ch = ChannelParams(pathloss_exponent=4, rx_sensitivity=-80.0)
        assert link_ok(tx, rx, ch)
        assert not link_ok(tx, rx, ChannelParams(pathloss_exponent=4, rx_sensitivity=-79.999))

    @pytest.mark.parametrize("thr", [0.0, 3.0, 30.0])
    def test_jammer_colocated_with_rx(self, thr):
        tx, rx = Node(0, (0.0, 0.0), 30.0), Node(1, (0.5, 0.0), 0.0)
        jam = Jammer((0.5, 0.0), 0.0)
        ch = ChannelParams.perfect(sir_threshold=thr)
        assert not link_ok(tx, rx, ch, jam)
        assert not link_matrix(Deployment((tx, rx), 1.0), ch, jam)[0, 1]

    def test_inactive_jammer_ignored(self):
        tx, rx = Node(0, (0.0, 0.0), 0.0), Node(1, (10.0, 0.0), 0.0)
        jam = Jammer((10.0, 0.0), 100.0, active=False)
        assert link_ok(tx, rx, ChannelParams.perfect(sir_threshold=50), jam)

    def test_crashed_transmitter(self):
        tx = Node(0, (0.0, 0.0), 0.0, fault=Fault.CRASHED)
        assert not link_ok(tx, Node(1, (1.0, 0.0)), ChannelParams.perfect())

    def test_infinite_threshold_with_jammer_rejected(self):
        with pytest.raises(ValueError):
            link_ok(Node(0, (0.0, 0.0)), Node(1, (1.0, 0.0)), ChannelParams(sir_threshold=math.inf), JAMMING_JAMMER)

    def test_noise_floor_acts_as_interference(self):
        tx, rx = Node(0, (0.0, 0.0), 0.0), Node(1, (10.0, 0.0), 0.0)
        # signal -40 dBm against -50 dBm noise -> SINR 10 dB
        ch = ChannelParams(rx_sensitivity=-math.inf, noise_floor=-50.0, sir_threshold=10.0)
        assert link_ok(tx, rx, ch)
        assert not link_ok(tx, rx, ChannelParams(rx_sensitivity=-math.inf, noise_floor=-50.0, sir_threshold=10.01))

    def test_jamming_seed42_leader_links(self):
        # 288 of 299 leader->replica links clear -10 dB: independent per-link evaluation
        # of 25*log10(d_jammer/d_leader) over the seed-42 placement
        dep = place_nodes(300, 100, seed=42)
        ok = [link_ok(dep[0], n, JAMMING_CHANNEL, JAMMING_JAMMER) for n in dep.nodes[1:]]
        assert sum(ok) == 288
        assert coverage_set(dep[0], dep, JAMMING_CHANNEL, JAMMING_JAMMER) == frozenset(
            n.id for n, good in zip(dep.nodes[1:], ok) if good
        )

    def test_matrix_matches_scalar(self):
        dep = place_nodes(60, 100, seed=5)
        ch = ChannelParams(pathloss_exponent=3, rx_sensitivity=-55, sir_threshold=-3)
        jam = Jammer((20.0, -30.0), 10.0)
        m = link_matrix(dep, ch, jam)
        g = brute_force_graph(dep, ch, jam)
        assert {(int(a), int(b)) for a, b in zip(*np.nonzero(m))} == set(g.edges)


class TestCoverage:
    def test_perfect_channel_covers_all(self, perfect):
        dep = place_nodes(50, 1000, seed=1)
        assert coverage_set(dep[0], dep, perfect) == frozenset(range(1, 50))

    def test_too_weak_covers_none(self):
        dep = place_nodes(50, 100, seed=1, tx_power=-200.0)
        assert coverage_set(dep[0], dep, ChannelParams()) == frozenset()

    def test_seed42_equals_double_loop(self):
        dep = place_nodes(300, 100, seed=42)
        g = brute_force_graph(dep, JAMMING_CHANNEL, JAMMING_JAMMER)
        for node in dep.nodes[::37]:
            assert coverage_set(node, dep, JAMMING_CHANNEL, JAMMING_JAMMER) == frozenset(g.successors(node.id))


class TestFlood:
    def test_perfect_single_transmission(self, perfect):
        dep = place_nodes(40, 100, seed=2)
        res = flood_reach(dep[0], dep, perfect)
        assert res.reached == frozenset(range(1, 40))
        assert res.transmissions == 1

    def test_isolated_source(self):
        dep = place_nodes(40, 100, seed=2, tx_power=-300.0)
        res = flood_reach(dep[0], dep, ChannelParams())
        assert res.reached == frozenset() and res.transmissions == 1

    def test_line_of_three(self):
        # 0 dBm, gamma 4, beta -80 dBm: range exactly 100 m
        dep = line_deployment([0, 90, 180])
        ch = ChannelParams(pathloss_exponent=4, rx_sensitivity=-80.0)
        assert coverage_set(dep[0], dep, ch) == {1}
        assert coverage_set(dep[1], dep, ch) == {0, 2}
        res = flood_reach(dep[0], dep, ch)
        assert res.reached == {1, 2}
        assert res.transmissions == 2
        assert res.relays == (0, 1)

    def test_crashed_relay_blocks(self):
        dep = line_deployment([0, 90, 180]).with_faults(crashed=[1])
        ch = ChannelParams(pathloss_exponent=4, rx_sensitivity=-80.0)
        res = flood_reach(dep[0], dep, ch)
        assert res.reached == {1} and res.transmissions == 1

    def test_matches_reachability_oracle(self):
        import networkx as nx

        ch = ChannelParams(pathloss_exponent=4, rx_sensitivity=-84.5)
        for seed in range(10):
            dep = place_nodes(40, 300, seed=seed, tx_power=10.0)
            g = brute_force_graph(dep, ch)
            res = flood_reach(dep[0], dep, ch)
            assert res.reached == nx.descendants(g, 0)
            assert len(set(res.relays)) == res.transmissions


# --- properties -------------------------------------------------------------------

seeds = st.integers(min_value=0, max_value=2**32)
powers = st.floats(min_value=-40, max_value=40)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, p=powers, dp=st.floats(min_value=0, max_value=30))
def test_coverage_monotone_in_power(seed, p, dp):
    dep = place_nodes(25, 150, seed)
    ch = ChannelParams(pathloss_exponent=3.0, rx_sensitivity=-60.0, sir_threshold=-5.0)
    jam = Jammer((40.0, 10.0), 5.0)
    lo = coverage_set(dep[0], dep.with_tx_power(p, [0]), ch, jam)
    hi = coverage_set(dep[0], dep.with_tx_power(p + dp, [0]), ch, jam)
    assert lo <= hi


@settings(max_examples=40, deadline=None)
@given(seed=seeds, beta=st.floats(min_value=-120, max_value=0), db=st.floats(min_value=0, max_value=40))
def test_coverage_monotone_in_sensitivity(seed, beta, db):
    dep = place_nodes(25, 150, seed)
    loose = ChannelParams(rx_sensitivity=beta - db)
    tight = ChannelParams(rx_sensitivity=beta)
    for node in dep.nodes[:3]:
        assert coverage_set(node, dep, tight) <= coverage_set(node, dep, loose)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, thr=st.floats(min_value=-20, max_value=10), dt=st.floats(min_value=0, max_value=10))
def test_surviving_links_monotone_in_sir(seed, thr, dt):
    dep = place_nodes(30, 100, seed)
    a = link_matrix(dep, ChannelParams.perfect(pathloss_exponent=2.5, sir_threshold=thr), JAMMING_JAMMER)
    b = link_matrix(dep, ChannelParams.perfect(pathloss_exponent=2.5, sir_threshold=thr + dt), JAMMING_JAMMER)
    assert not np.any(b & ~a)


@settings(max_examples=30, deadline=None)
@given(seed=seeds, power=st.floats(min_value=-20, max_value=20))
def test_flood_matches_oracle(seed, power):
    import networkx as nx

    dep = place_nodes(20, 200, seed, tx_power=power)
    ch = ChannelParams()
    res = flood_reach(dep[0], dep, ch)
    assert res.reached == nx.descendants(brute_force_graph(dep, ch), 0)
    assert res.transmissions <= len(res.reached) + 1


def test_pure_repeatable():
    dep = place_nodes(100, 100, seed=9)
    a = link_matrix(dep, JAMMING_CHANNEL, JAMMING_JAMMER)
    b = link_matrix(dep, JAMMING_CHANNEL, JAMMING_JAMMER)
    assert a.tobytes() == b.tobytes()
