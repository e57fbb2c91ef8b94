"""Node placement, log-distance propagation and link feasibility.

Everything here is a pure function of its inputs. ``link_ok`` is the scalar
reference rule; ``link_matrix`` evaluates the same rule for a whole
deployment with numpy and is what the consensus engines consume.
"""

from __future__ import annotations

import enum
import math
import warnings
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DegenerateDistanceWarning

DEFAULT_TX_POWER = 20.0  # dBm
MIN_DISTANCE = 1.0  # m, clamp for the log-distance law


class Role(enum.Enum):
    LEADER = "leader"
    REPLICA = "replica"
    MINER = "miner"
    CLIENT = "client"


class Fault(enum.Enum):
    HONEST = "honest"
    CRASHED = "crashed"
    BYZANTINE = "byzantine"


@dataclass(frozen=True)
class Node:
    id: int
    position: tuple[float, float]
    tx_power: float = DEFAULT_TX_POWER
    role: Role = Role.REPLICA
    fault: Fault = Fault.HONEST

    @property
    def crashed(self) -> bool:
        return self.fault is Fault.CRASHED


@dataclass(frozen=True)
class Deployment:
    nodes: tuple[Node, ...]
    coverage_radius: float
    seed: int = 0

    def __len__(self) -> int:
        return len(self.nodes)

    def __getitem__(self, i: int) -> Node:
        return self.nodes[i]

    @property
    def leader(self) -> Node:
        return self.nodes[0]

    def positions(self) -> np.ndarray:
        return np.array([n.position for n in self.nodes], dtype=float).reshape(-1, 2)

    def tx_powers(self) -> np.ndarray:
        return np.array([n.tx_power for n in self.nodes], dtype=float)

    def faults(self) -> list[Fault]:
        return [n.fault for n in self.nodes]

    def with_faults(
        self, crashed: Iterable[int] = (), byzantine: Iterable[int] = ()
    ) -> "Deployment":
        """Copy with the given node ids marked crashed / byzantine (others honest)."""
        crashed, byzantine = set(crashed), set(byzantine)
        if crashed & byzantine:
            raise ValueError(f"nodes both crashed and byzantine: {sorted(crashed & byzantine)}")
        nodes = []
        for n in self.nodes:
            fault = Fault.CRASHED if n.id in crashed else Fault.BYZANTINE if n.id in byzantine else Fault.HONEST
            nodes.append(replace(n, fault=fault))
        return replace(self, nodes=tuple(nodes))

    def with_tx_power(self, power: float, ids: Optional[Iterable[int]] = None) -> "Deployment":
        ids = None if ids is None else set(ids)
        nodes = tuple(
            replace(n, tx_power=power) if ids is None or n.id in ids else n for n in self.nodes
        )
        return replace(self, nodes=nodes)

    def with_role(self, role: Role) -> "Deployment":
        """Relabel every node (e.g. all miners for PoW); node 0 keeps its position."""
        return replace(self, nodes=tuple(replace(n, role=role) for n in self.nodes))


@dataclass(frozen=True)
class ChannelParams:
    pathloss_exponent: float = 4.0
    reference_loss: float = 0.0  # dB at 1 m
    rx_sensitivity: float = -84.5  # dBm
    sir_threshold: float = 0.0  # dB
    noise_floor: float = -math.inf  # dBm

    def __post_init__(self):
        if not self.pathloss_exponent > 0:
            raise ValueError("pathloss_exponent must be > 0")
        if math.isnan(self.sir_threshold) or math.isnan(self.rx_sensitivity):
            raise ValueError("rx_sensitivity and sir_threshold must not be NaN")

    @classmethod
    def perfect(cls, **kw) -> "ChannelParams":
        """Sensitivity of -inf: every transmission is detected absent interference."""
        kw.setdefault("rx_sensitivity", -math.inf)
        return cls(**kw)


@dataclass(frozen=True)
class Jammer:
    position: tuple[float, float]
    tx_power: float = DEFAULT_TX_POWER
    active: bool = True


@dataclass(frozen=True)
class FloodResult:
    reached: frozenset[int]
    transmissions: int
    relays: tuple[int, ...] = field(default=())


def place_nodes(
    n: int,
    radius: float,
    seed: int,
    tx_power: float = DEFAULT_TX_POWER,
    role: Role = Role.REPLICA,
) -> Deployment:
    """Leader at the origin plus ``n - 1`` nodes uniform over the disk.

    Radii are drawn as ``radius * sqrt(u)`` so the density is uniform in area.
    The same ``(n, radius, seed)`` always yields the same positions.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not radius > 0:
        raise ValueError(f"radius must be > 0, got {radius}")
    rng = np.random.default_rng(seed)
    u = rng.random(n - 1)
    w = rng.random(n - 1)
    r = radius * np.sqrt(u)
    theta = 2.0 * math.pi * w
    xs, ys = r * np.cos(theta), r * np.sin(theta)

    leader_role = Role.MINER if role is Role.MINER else Role.LEADER
    nodes = [Node(0, (0.0, 0.0), tx_power, leader_role)]
    nodes += [Node(i + 1, (float(x), float(y)), tx_power, role) for i, (x, y) in enumerate(zip(xs, ys))]
    return Deployment(tuple(nodes), float(radius), seed)


def nodes_for_density(density: float, radius: float) -> int:
    """Deterministic node count ``round(density * pi * radius**2)``, at least 1."""
    if not density > 0:
        raise ValueError(f"density must be > 0, got {density}")
    return max(1, int(round(density * math.pi * radius * radius)))


def place_nodes_density(
    density: float,
    radius: float,
    seed: int,
    tx_power: float = DEFAULT_TX_POWER,
    poisson: bool = False,
) -> Deployment:
    """Place nodes at a given density (nodes/m^2).

    By default the count is fixed at the expected value so sweeps vary
    smoothly; ``poisson=True`` draws the non-leader count from a Poisson law
    instead (a homogeneous PPP around a leader at the origin).
    """
    if poisson:
        if not density > 0:
            raise ValueError(f"density must be > 0, got {density}")
        # separate stream so the positions below keep their own seed
        k = int(np.random.default_rng([seed, 1]).poisson(density * math.pi * radius * radius))
        return place_nodes(k + 1, radius, seed, tx_power)
    return place_nodes(nodes_for_density(density, radius), radius, seed, tx_power)


def received_power(tx: Node, rx_position: Sequence[float], ch: ChannelParams) -> float:
    """Log-distance received power in dBm.

    Coincident positions are clamped to 1 m and flagged with a
    :class:`DegenerateDistanceWarning`.
    """
    d = math.dist(tx.position, rx_position)
    if d == 0.0:
        warnings.warn(
            f"node {tx.id} transmits to its own position; distance clamped to {MIN_DISTANCE} m",
            DegenerateDistanceWarning,
            stacklevel=2,
        )
    d = max(d, MIN_DISTANCE)
    return tx.tx_power - ch.reference_loss - 10.0 * ch.pathloss_exponent * math.log10(d)


def _interference_mw(rx_position: Sequence[float], ch: ChannelParams, jam: Optional[Jammer]) -> float:
    total = 0.0
    if jam is not None and jam.active:
        dj = math.dist(jam.position, rx_position)
        if dj == 0.0:
            return math.inf
        jam_dbm = jam.tx_power - ch.reference_loss - 10.0 * ch.pathloss_exponent * math.log10(max(dj, MIN_DISTANCE))
        total += 10.0 ** (jam_dbm / 10.0)
    if ch.noise_floor > -math.inf:
        total += 10.0 ** (ch.noise_floor / 10.0)
    return total


def _check_threshold(ch: ChannelParams, jam: Optional[Jammer]) -> None:
    if jam is not None and jam.active and not math.isfinite(ch.sir_threshold):
        raise ValueError("sir_threshold must be finite when a jammer is active")


def link_ok(tx: Node, rx: Node, ch: ChannelParams, jam: Optional[Jammer] = None) -> bool:
    """True iff rx detects tx: power at least the sensitivity, and SIR at least
    the threshold whenever there is interference. Both comparisons inclusive.
    Crashed transmitters never reach anyone."""
    _check_threshold(ch, jam)
    if tx.crashed:
        return False
    d = max(math.dist(tx.position, rx.position), MIN_DISTANCE)
    signal = tx.tx_power - ch.reference_loss - 10.0 * ch.pathloss_exponent * math.log10(d)
    if not signal >= ch.rx_sensitivity:
        return False
    interference = _interference_mw(rx.position, ch, jam)
    if interference == 0.0:
        return True
    if math.isinf(interference):
        return False
    return signal - 10.0 * math.log10(interference) >= ch.sir_threshold


def _received_dbm(tx_power, src: np.ndarray, dst: np.ndarray, ch: ChannelParams) -> np.ndarray:
    d = np.linalg.norm(src - dst, axis=-1)
    d = np.maximum(d, MIN_DISTANCE)
    return tx_power - ch.reference_loss - 10.0 * ch.pathloss_exponent * np.log10(d)


def _interference_dbm(rx_positions: np.ndarray, ch: ChannelParams, jam: Optional[Jammer]) -> np.ndarray:
    """Total interference at each receiver in dBm (-inf when none)."""
    mw = np.zeros(len(rx_positions))
    if jam is not None and jam.active:
        jpos = np.asarray(jam.position, dtype=float)
        dj = np.linalg.norm(rx_positions - jpos, axis=-1)
        jam_dbm = _received_dbm(jam.tx_power, jpos, rx_positions, ch)
        mw = mw + 10.0 ** (jam_dbm / 10.0)
        mw[dj == 0.0] = np.inf
    if ch.noise_floor > -math.inf:
        mw = mw + 10.0 ** (ch.noise_floor / 10.0)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(mw)


def _detect(signal: np.ndarray, interference: np.ndarray, ch: ChannelParams) -> np.ndarray:
    ok = signal >= ch.rx_sensitivity
    with np.errstate(invalid="ignore"):
        sir_ok = (signal - interference) >= ch.sir_threshold
    return ok & np.where(np.isneginf(interference), True, sir_ok)


def link_matrix(deployment: Deployment, ch: ChannelParams, jam: Optional[Jammer] = None) -> np.ndarray:
    """Boolean ``[tx, rx]`` matrix of ``link_ok`` over all ordered node pairs.

    The diagonal is False; rows of crashed nodes are all False.
    """
    _check_threshold(ch, jam)
    pos = deployment.positions()
    powers = deployment.tx_powers()
    signal = _received_dbm(powers[:, None], pos[:, None, :], pos[None, :, :], ch)
    interference = _interference_dbm(pos, ch, jam)
    links = _detect(signal, interference[None, :], ch)
    np.fill_diagonal(links, False)
    crashed = np.array([n.crashed for n in deployment.nodes], dtype=bool)
    links[crashed, :] = False
    return links


def links_from(
    position: Sequence[float],
    tx_power: float,
    deployment: Deployment,
    ch: ChannelParams,
    jam: Optional[Jammer] = None,
) -> np.ndarray:
    """Which deployment nodes detect a transmitter that is not itself a node
    (the PoW client). Coincident receivers are clamped like any other link."""
    _check_threshold(ch, jam)
    pos = deployment.positions()
    signal = _received_dbm(tx_power, np.asarray(position, dtype=float)[None, :], pos, ch)
    return _detect(signal, _interference_dbm(pos, ch, jam), ch)


def coverage_set(
    tx: Node, deployment: Deployment, ch: ChannelParams, jam: Optional[Jammer] = None
) -> frozenset[int]:
    row = link_matrix(deployment, ch, jam)[tx.id]
    return frozenset(int(i) for i in np.flatnonzero(row))


def flood_reach(
    source: Node, deployment: Deployment, ch: ChannelParams, jam: Optional[Jammer] = None
) -> FloodResult:
    """Flood a message from ``source`` over the directed link graph.

    Nodes are processed breadth-first in id order. Every reached node is
    offered one rebroadcast; it is counted as a transmission only if that
    rebroadcast delivers the message to at least one node that does not yet
    have it. ``relays`` lists the transmitting nodes in broadcast order.
    """
    if source.crashed:
        return FloodResult(frozenset(), 0, ())
    links = link_matrix(deployment, ch, jam)
    have = np.zeros(len(deployment), dtype=bool)
    have[source.id] = True
    relays = [source.id]
    frontier = deque(int(i) for i in np.flatnonzero(links[source.id]))
    have[links[source.id]] = True
    while frontier:
        node = frontier.popleft()
        fresh = links[node] & ~have
        if not fresh.any():
            continue
        relays.append(node)
        new_ids = np.flatnonzero(fresh)
        have[new_ids] = True
        frontier.extend(int(i) for i in new_ids)
    reached = frozenset(int(i) for i in np.flatnonzero(have)) - {source.id}
    return FloodResult(reached, len(relays), tuple(relays))
