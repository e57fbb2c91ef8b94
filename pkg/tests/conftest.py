import math

import networkx as nx
import pytest

from wbnsim.radio import ChannelParams, Jammer, link_ok

JAMMING_CHANNEL = ChannelParams(pathloss_exponent=2.5, rx_sensitivity=-math.inf, sir_threshold=-10.0)
JAMMING_JAMMER = Jammer((50.0, 0.0), 20.0)


def brute_force_graph(dep, ch, jam=None) -> nx.DiGraph:
    """Directed link graph from the scalar link rule, one pair at a time."""
    g = nx.DiGraph()
    g.add_nodes_from(n.id for n in dep.nodes)
    for a in dep.nodes:
        for b in dep.nodes:
            if a.id != b.id and link_ok(a, b, ch, jam):
                g.add_edge(a.id, b.id)
    return g


@pytest.fixture
def perfect():
    return ChannelParams.perfect()


@pytest.fixture
def jamming_channel():
    return JAMMING_CHANNEL


@pytest.fixture
def jamming_jammer():
    return JAMMING_JAMMER


# --- acceptance reporting: one PASS/FAIL line per criterion ---------------------------

_ACCEPTANCE: list[tuple[str, str, float]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = "PASS" if rep.passed else "FAIL"
        _ACCEPTANCE.append((marker.args[0], status, rep.duration))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, secs in _ACCEPTANCE:
        terminalreporter.write_line(f"{status}  {name}  ({secs:.2f}s)")
