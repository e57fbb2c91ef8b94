"""Slotted, message-level execution of one PoW / PBFT / Raft round.

A round runs request -> consensus -> state replication -> reply over a single
shared channel: every transmission takes one slot of length ``interval`` and
reaches whichever receivers the link model lets through.

Counting convention: ``tx_events`` and ``rx_events`` cover the consensus and
state-replication stages only. Every transmission also lands in the sender's
own message log, and that self-delivery is counted as a reception (a PBFT
node's own prepare counts toward its quorum; the Raft leader acks its own
entry). Under a perfect channel this yields exactly 2N+1 / N+1 / 2
transmissions and 2N^2+N / 2N / 2N receptions for PBFT / Raft / PoW.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import radio
from .errors import ConfigMismatchError, NoMinerReachedError
from .radio import ChannelParams, Deployment, Fault, Jammer

CLIENT_ID = -1


class Mechanism(enum.Enum):
    POW = "pow"
    PBFT = "pbft"
    RAFT = "raft"


class ByzantineBehavior(enum.Enum):
    SILENT_DROP = "silent_drop"
    CONFLICTING_VOTE = "conflicting_vote"


@dataclass(frozen=True)
class ConsensusConfig:
    mechanism: Mechanism = Mechanism.PBFT
    fault_budget: int = 0
    interval: float = 1.0  # seconds per slot
    max_slots_timeout: Optional[int] = None  # cap on consensus+replication slots
    byzantine_behavior: ByzantineBehavior = ByzantineBehavior.SILENT_DROP

    def __post_init__(self):
        if self.fault_budget < 0:
            raise ValueError("fault_budget must be >= 0")
        if not self.interval > 0:
            raise ValueError("interval must be > 0")
        if self.max_slots_timeout is not None and self.max_slots_timeout < 1:
            raise ValueError("max_slots_timeout must be >= 1")


@dataclass(frozen=True)
class TraceEntry:
    stage: str
    slot: int
    sender: int
    recipients: tuple[int, ...]


@dataclass(frozen=True)
class RoundResult:
    success: bool
    confirming_nodes: int
    tx_events: int
    rx_events: int
    slots_elapsed: int
    stage_trace: tuple[TraceEntry, ...] = field(default=())
    timed_out: bool = False
    interval: float = 1.0

    @property
    def elapsed(self) -> float:
        return self.slots_elapsed * self.interval


def min_nodes(mechanism: Mechanism, f: int) -> int:
    if mechanism is Mechanism.PBFT:
        return 3 * f + 1
    if mechanism is Mechanism.RAFT:
        return 2 * f + 1
    return 1


def quorum(mechanism: Mechanism, f: int, n: int) -> int:
    """Confirmations needed for a round to commit.

    PBFT needs 2f+1 out of at least 3f+1 nodes; Raft and PoW need a strict
    majority of all N nodes.
    """
    if f < 0 or n < 1:
        raise ValueError(f"need f >= 0 and N >= 1, got f={f}, N={n}")
    need = min_nodes(mechanism, f)
    if n < need:
        raise ConfigMismatchError(
            f"{mechanism.value} with f={f} needs N >= {need}, got N={n}"
        )
    if mechanism is Mechanism.PBFT:
        return 2 * f + 1
    return n // 2 + 1


# --- link models -----------------------------------------------------------


class StaticLinks:
    """Deterministic links from a ``[tx, rx]`` boolean matrix."""

    def __init__(self, matrix: np.ndarray):
        self.matrix = np.asarray(matrix, dtype=bool)

    def broadcast(self, sender: int) -> np.ndarray:
        return self.matrix[sender].copy()

    def unicast(self, sender: int, receiver: int) -> bool:
        return bool(self.matrix[sender, receiver])


class BernoulliLinks:
    """Every reception is an independent Bernoulli(p) trial, drawn afresh per
    transmission."""

    def __init__(self, n: int, p: float, rng: np.random.Generator):
        self.n, self.p, self.rng = n, p, rng

    def broadcast(self, sender: int) -> np.ndarray:
        mask = self.rng.random(self.n) < self.p
        mask[sender] = False
        return mask

    def unicast(self, sender: int, receiver: int) -> bool:
        return bool(self.rng.random() < self.p)


class _Timeout(Exception):
    pass


class _Ledger:
    """Slot clock plus event counters for one round."""

    def __init__(self, n: int, alive: np.ndarray, cfg: ConsensusConfig):
        self.n = n
        self.alive = alive
        self.cap = cfg.max_slots_timeout
        self.slot = 0
        self.tx = 0
        self.rx = 0
        self.trace: list[TraceEntry] = []

    def side_slot(self, stage: str, sender: int, recipients: Sequence[int]) -> None:
        # request / reply: occupies a slot but is outside the consensus counters
        self.trace.append(TraceEntry(stage, self.slot, sender, tuple(recipients)))
        self.slot += 1

    def _take_slot(self) -> None:
        if self.cap is not None and self.tx >= self.cap:
            raise _Timeout
        self.tx += 1

    def broadcast(self, stage: str, sender: int, links) -> np.ndarray:
        self._take_slot()
        got = links.broadcast(sender) & self.alive
        got[sender] = False
        ids = tuple(int(i) for i in np.flatnonzero(got))
        self.rx += 1 + len(ids)
        self.trace.append(TraceEntry(stage, self.slot, sender, ids))
        self.slot += 1
        return got

    def unicast(self, stage: str, sender: int, receiver: int, links) -> bool:
        self._take_slot()
        if sender == receiver:
            ok = True
        else:
            ok = bool(self.alive[receiver]) and links.unicast(sender, receiver)
        self.rx += int(ok)
        self.trace.append(TraceEntry(stage, self.slot, sender, (receiver,) if ok else ()))
        self.slot += 1
        return ok

    def result(self, success: bool, confirming: int, cfg: ConsensusConfig, timed_out=False) -> RoundResult:
        return RoundResult(
            success=success,
            confirming_nodes=confirming,
            tx_events=self.tx,
            rx_events=self.rx,
            slots_elapsed=self.slot,
            stage_trace=tuple(self.trace),
            timed_out=timed_out,
            interval=cfg.interval,
        )


def _masks(faults: Sequence[Fault], cfg: ConsensusConfig):
    faults = list(faults)
    alive = np.array([x is not Fault.CRASHED for x in faults])
    honest = np.array([x is Fault.HONEST for x in faults])
    byz = np.array([x is Fault.BYZANTINE for x in faults])
    if cfg.byzantine_behavior is ByzantineBehavior.SILENT_DROP:
        speaks = honest.copy()
    else:
        speaks = honest | byz
    return alive, honest, speaks


# --- engines over an abstract link model ------------------------------------


def pbft_round(faults: Sequence[Fault], links, cfg: ConsensusConfig) -> RoundResult:
    """PBFT pre-prepare / prepare / commit with node 0 as primary.

    A node is prepared once it holds the pre-prepare and has 2f valid prepares
    from distinct other nodes; it confirms once it has 2f+1 valid commits,
    its own included. Byzantine messages never count toward a quorum.
    """
    n, f = len(faults), cfg.fault_budget
    alive, honest, speaks = _masks(faults, cfg)
    led = _Ledger(n, alive, cfg)
    led.side_slot("request", CLIENT_ID, (0,))
    try:
        if not speaks[0]:
            return led.result(False, 0, cfg)
        got = led.broadcast("pre-prepare", 0, links)
        if not honest[0]:
            return led.result(False, 0, cfg)
        holders = got.copy()
        holders[0] = True

        prepares = np.zeros(n, dtype=int)
        for i in range(n):
            if holders[i] and speaks[i]:
                got = led.broadcast("prepare", i, links)
                if honest[i]:
                    prepares += got
        prepared = holders & honest & (prepares >= 2 * f)

        commits = np.zeros(n, dtype=int)
        for i in range(n):
            if prepared[i] or (holders[i] and speaks[i] and not honest[i]):
                got = led.broadcast("commit", i, links)
                if honest[i]:
                    commits += got
        confirmed = prepared & (commits + 1 >= 2 * f + 1)
    except _Timeout:
        return led.result(False, 0, cfg, timed_out=True)

    confirming = int(confirmed.sum())
    success = confirming >= quorum(Mechanism.PBFT, f, n)
    if success:
        led.side_slot("reply", 0, (CLIENT_ID,))
    return led.result(success, confirming, cfg)


def raft_round(faults: Sequence[Fault], links, cfg: ConsensusConfig) -> RoundResult:
    """Raft log replication: leader DL broadcast, then one UL ack per follower
    that received it. The leader's own ack is a loopback slot."""
    n = len(faults)
    alive, honest, speaks = _masks(faults, cfg)
    led = _Ledger(n, alive, cfg)
    led.side_slot("request", CLIENT_ID, (0,))
    try:
        if not speaks[0]:
            return led.result(False, 0, cfg)
        dl = led.broadcast("append", 0, links)
        led.unicast("ack", 0, 0, links)
        votes = 0
        for i in range(1, n):
            if dl[i] and speaks[i]:
                ul = led.unicast("ack", i, 0, links)
                votes += int(ul and honest[i])
    except _Timeout:
        return led.result(False, 0, cfg, timed_out=True)

    confirming = votes + 1 if honest[0] else 0
    success = confirming >= quorum(Mechanism.RAFT, 0, n)
    if success:
        led.side_slot("reply", 0, (CLIENT_ID,))
    return led.result(success, confirming, cfg)


def pow_round(
    faults: Sequence[Fault],
    links,
    client_reach: np.ndarray,
    cfg: ConsensusConfig,
    rng: np.random.Generator,
) -> RoundResult:
    """PoW: client broadcast, transaction relay by the lowest-id receiving
    miner, communication-free mining race, block broadcast by the winner.

    Only honest miners relay and mine; byzantine miners of either behaviour
    sit the round out.
    """
    n = len(faults)
    alive, honest, _ = _masks(faults, cfg)
    client_reach = np.asarray(client_reach, dtype=bool) & alive
    if not client_reach.any():
        raise NoMinerReachedError("client broadcast reached no miner")
    # one draw per miner regardless of outcome keeps seeds comparable
    mining_times = rng.exponential(1.0, size=n)

    led = _Ledger(n, alive, cfg)
    led.side_slot("request", CLIENT_ID, tuple(int(i) for i in np.flatnonzero(client_reach)))
    candidates = np.flatnonzero(client_reach & honest)
    if len(candidates) == 0:
        return led.result(False, 0, cfg)
    try:
        relay = int(candidates[0])
        got = led.broadcast("relay", relay, links)
        holders = (client_reach | got) & honest
        holders[relay] = True
        winner = int(np.flatnonzero(holders)[np.argmin(mining_times[holders])])
        got = led.broadcast("block", winner, links)
    except _Timeout:
        return led.result(False, 0, cfg, timed_out=True)

    block = got & honest
    block[winner] = True
    confirming = int(block.sum())
    success = confirming >= quorum(Mechanism.POW, 0, n)
    if success:
        led.side_slot("reply", winner, (CLIENT_ID,))
    return led.result(success, confirming, cfg)


# --- radio-backed entry points ----------------------------------------------


def _check(deployment: Deployment, cfg: ConsensusConfig, mechanism: Mechanism) -> None:
    quorum(mechanism, cfg.fault_budget, len(deployment))


def run_pbft(
    deployment: Deployment,
    ch: ChannelParams,
    cfg: ConsensusConfig,
    jam: Optional[Jammer] = None,
    seed: int = 0,
) -> RoundResult:
    _check(deployment, cfg, Mechanism.PBFT)
    links = StaticLinks(radio.link_matrix(deployment, ch, jam))
    return pbft_round(deployment.faults(), links, cfg)


def run_raft(
    deployment: Deployment,
    ch: ChannelParams,
    cfg: ConsensusConfig,
    jam: Optional[Jammer] = None,
    seed: int = 0,
) -> RoundResult:
    _check(deployment, cfg, Mechanism.RAFT)
    links = StaticLinks(radio.link_matrix(deployment, ch, jam))
    return raft_round(deployment.faults(), links, cfg)


def run_pow(
    deployment: Deployment,
    ch: ChannelParams,
    cfg: ConsensusConfig,
    jam: Optional[Jammer] = None,
    seed: int = 0,
) -> RoundResult:
    """The client transmits from the origin with the leader's Tx power."""
    _check(deployment, cfg, Mechanism.POW)
    links = StaticLinks(radio.link_matrix(deployment, ch, jam))
    reach = radio.links_from((0.0, 0.0), deployment.leader.tx_power, deployment, ch, jam)
    return pow_round(deployment.faults(), links, reach, cfg, np.random.default_rng(seed))


_ENGINES = {
    Mechanism.PBFT: run_pbft,
    Mechanism.RAFT: run_raft,
    Mechanism.POW: run_pow,
}


def run_round(
    deployment: Deployment,
    ch: ChannelParams,
    cfg: ConsensusConfig,
    jam: Optional[Jammer] = None,
    seed: int = 0,
) -> RoundResult:
    return _ENGINES[cfg.mechanism](deployment, ch, cfg, jam, seed)


def raft_link_status(
    deployment: Deployment, ch: ChannelParams, jam: Optional[Jammer] = None
) -> tuple[np.ndarray, np.ndarray]:
    """Per-node (DL ok, UL ok) for a Raft round led by node 0.

    Entry 0 (the leader) is True in both arrays.
    """
    links = radio.link_matrix(deployment, ch, jam)
    dl = links[0].copy()
    ul = links[:, 0].copy()
    dl[0] = ul[0] = True
    return dl, ul
