"""Seeded scenario runners producing rectangular result tables.

Each trial is a pure function of its absolute seed ``base_seed + trial``,
so trials may run in any order (or in parallel) without changing a row.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Optional, Sequence

import numpy as np

from . import __version__, analytics, radio
from .analytics import IntervalModel
from .consensus import ConsensusConfig, Mechanism, raft_link_status, run_raft
from .errors import DivergentLatencyError
from .radio import ChannelParams, Jammer

BUILD_ID = f"wbnsim {__version__}"
THREADS_ENV = "WBNSIM_THREADS"

DEFAULT_SIR_THRESHOLDS = (-12.0, -10.0, -8.0, -6.0, -4.0)


@dataclass
class SweepTable:
    header: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    metadata: dict[str, str] = field(default_factory=dict)
    extras: dict[str, "SweepTable"] = field(default_factory=dict)

    def __post_init__(self):
        self.header = tuple(self.header)
        width = len(self.header)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise ValueError(f"row {i} has {len(row)} cells, header has {width}")

    def column(self, name: str) -> list:
        j = self.header.index(name)
        return [row[j] for row in self.rows]

    def records(self) -> list[dict[str, Any]]:
        return [dict(zip(self.header, row)) for row in self.rows]


@dataclass(frozen=True)
class SweepSpec:
    experiment: str
    mechanisms: tuple[Mechanism, ...] = (Mechanism.PBFT, Mechanism.RAFT, Mechanism.POW)
    n_values: tuple[int, ...] = tuple(range(2, 101))
    f_values: tuple[int, ...] = (100, 1000)
    f_auto: bool = True
    densities: tuple[float, ...] = tuple(analytics.default_density_grid())
    sir_thresholds: tuple[float, ...] = DEFAULT_SIR_THRESHOLDS
    v_grid: tuple[float, ...] = tuple(analytics.default_interval_grid())
    trials: int = 100
    base_seed: int = 0
    nodes: int = 300
    radius: float = 100.0
    tx_power: float = radio.DEFAULT_TX_POWER
    channel: ChannelParams = field(default_factory=ChannelParams)
    jammer: Optional[Jammer] = None
    interval_model: IntervalModel = field(default_factory=IntervalModel)
    r_max: float = analytics.DEFAULT_R_MAX
    map_trials: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for name in ("mechanisms", "n_values", "f_values", "densities", "sir_thresholds", "v_grid"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} must be non-empty")
        if self.base_seed < 0 or self.base_seed >= 2**64:
            raise ValueError("base_seed must be an unsigned 64-bit integer")

    def seed(self, trial: int) -> int:
        return (self.base_seed + trial) % 2**64

    def resolved_jammer(self) -> Jammer:
        """Configured jammer, else one at (R/2, 0) with the nodes' Tx power."""
        if self.jammer is not None:
            return self.jammer
        return Jammer((self.radius / 2.0, 0.0), self.tx_power, True)


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        k = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if k < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return k


def parallel_map(fn: Callable, items: Iterable, threads: Optional[int] = None) -> list:
    """Ordered map; results come back in input order whatever the thread count."""
    items = list(items)
    threads = thread_count() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _meta(spec: SweepSpec, **extra: str) -> dict[str, str]:
    meta = {"experiment": spec.experiment, "build": BUILD_ID}
    meta.update(extra)
    return meta


# --- complexity -----------------------------------------------------------------


def run_complexity_sweep(spec: SweepSpec) -> SweepTable:
    rows = [
        (m.value, n, analytics.comm_complexity(m, n), analytics.spectrum_requirement(m, n))
        for m in spec.mechanisms
        for n in spec.n_values
    ]
    return SweepTable(("mechanism", "N", "complexity", "spectrum"), rows, _meta(spec))


# --- viability --------------------------------------------------------------------


def _viability_row(density: float, mode: str, f: int, n_nodes: int, spec: SweepSpec) -> tuple:
    res = analytics.min_viable_power(f, density, spec.channel, r_max=math.inf)
    return (density, mode, n_nodes, f, res.r_star, res.p1_star, res.p2_star, res.feasible(spec.r_max))


def run_viability_sweep(spec: SweepSpec) -> SweepTable:
    """Minimum leader/replica power per (density, f). The ``auto`` rows use
    f = floor((N-1)/3) with N the expected node count inside ``r_max``.
    Rows beyond ``r_max`` are kept and marked infeasible."""
    rows = []
    for density in spec.densities:
        n_nodes = radio.nodes_for_density(density, spec.r_max)
        for f in spec.f_values:
            rows.append(_viability_row(density, "fixed", f, n_nodes, spec))
        if spec.f_auto:
            rows.append(_viability_row(density, "auto", (n_nodes - 1) // 3, n_nodes, spec))
    header = ("lambda", "f_mode", "N", "f", "r_star", "p1_star", "p2_star", "feasible")
    return SweepTable(header, rows, _meta(spec, r_max=format(spec.r_max, ".9g")))


# --- jamming ----------------------------------------------------------------------


def _jamming_trial(spec: SweepSpec, trial: int):
    seed = spec.seed(trial)
    dep = radio.place_nodes(spec.nodes, spec.radius, seed, spec.tx_power)
    jam = spec.resolved_jammer()
    cfg = ConsensusConfig(Mechanism.RAFT)
    followers = max(len(dep) - 1, 1)
    rows, maps = [], []
    for sir in spec.sir_thresholds:
        ch = replace(spec.channel, sir_threshold=sir)
        res = run_raft(dep, ch, cfg, jam, seed)
        dl, ul = raft_link_status(dep, ch, jam)
        vote = dl & ul
        votes = int(vote[1:].sum())
        rows.append((sir, trial, seed, votes, votes / followers, res.confirming_nodes, res.success))
        if trial < spec.map_trials:
            for node in dep.nodes:
                i = node.id
                maps.append((sir, trial, i, node.position[0], node.position[1], bool(dl[i]), bool(ul[i]), bool(vote[i])))
    return rows, maps


def run_jamming_experiment(spec: SweepSpec) -> SweepTable:
    """Raft rounds over seeded placements for each SIR threshold.

    Extras: ``summary`` (per-threshold consensus rate and mean vote fraction)
    and, when ``map_trials > 0``, ``map`` with per-node DL/UL outcomes.
    """
    per_trial = parallel_map(lambda t: _jamming_trial(spec, t), range(spec.trials))
    k = len(spec.sir_thresholds)
    rows = [per_trial[t][0][s] for s in range(k) for t in range(spec.trials)]
    jam = spec.resolved_jammer()
    meta = _meta(
        spec,
        jammer=f"{jam.position[0]:.9g},{jam.position[1]:.9g},{jam.tx_power:.9g},{jam.active}",
    )
    table = SweepTable(
        ("sir_threshold_db", "trial", "seed", "votes", "vote_fraction", "confirming_nodes", "success"),
        rows,
        meta,
    )

    summary = []
    for s, sir in enumerate(spec.sir_thresholds):
        block = [per_trial[t][0][s] for t in range(spec.trials)]
        rate = sum(r[6] for r in block) / spec.trials
        mean_frac = float(np.mean([r[4] for r in block]))
        summary.append((sir, spec.trials, rate, mean_frac))
    table.extras["summary"] = SweepTable(
        ("sir_threshold_db", "trials", "consensus_rate", "mean_vote_fraction"), summary, dict(meta)
    )
    if spec.map_trials > 0:
        maps = sorted(
            (m for t in range(min(spec.map_trials, spec.trials)) for m in per_trial[t][1]),
            key=lambda m: (spec.sir_thresholds.index(m[0]), m[1], m[2]),
        )
        table.extras["map"] = SweepTable(
            ("sir_threshold_db", "trial", "id", "x", "y", "dl_ok", "ul_ok", "vote_ok"), maps, dict(meta)
        )
    return table


# --- interval -----------------------------------------------------------------------


def _interval_rows(spec: SweepSpec, n: int, f: int) -> list[tuple]:
    model = spec.interval_model
    rows = []
    for v in spec.v_grid:
        p_link = model.link_success(v)
        pr = analytics.p_round(v, n, f, model)
        tps = analytics.throughput(v, n, f, model)
        try:
            lat = analytics.latency(v, n, f, model)
            divergent = False
        except DivergentLatencyError:
            lat, divergent = math.inf, True
        rows.append((v, n, f, p_link, pr, tps, lat, divergent))
    return rows


def run_interval_sweep(spec: SweepSpec) -> SweepTable:
    """Throughput and latency over the interval grid for every valid (n, f).

    Combinations with n < 3f+1 are skipped. Extra ``summary`` holds the
    per-(n, f) optimum.
    """
    combos = [(n, f) for n in spec.n_values for f in spec.f_values if n >= 3 * f + 1]
    if not combos:
        raise ValueError("no (n, f) combination satisfies n >= 3f+1")
    blocks = parallel_map(lambda nf: _interval_rows(spec, *nf), combos)
    rows = [r for block in blocks for r in block]
    header = ("v", "n", "f", "p_link", "p_round", "throughput", "latency", "latency_divergent")
    table = SweepTable(header, rows, _meta(spec, tau=format(spec.interval_model.tau, ".9g"),
                                           block_txns=str(spec.interval_model.block_txns)))

    summary = []
    for (n, f), block in zip(combos, blocks):
        best = int(np.argmax([r[5] for r in block]))
        v_star, tps_star, lat_star = block[best][0], block[best][5], block[best][6]
        summary.append((n, f, v_star, tps_star, lat_star))
    table.extras["summary"] = SweepTable(
        ("n", "f", "v_star", "tps_star", "latency_at_v_star"), summary, dict(table.metadata)
    )
    return table


RUNNERS: dict[str, Callable[[SweepSpec], SweepTable]] = {
    "complexity": run_complexity_sweep,
    "viability": run_viability_sweep,
    "jamming": run_jamming_experiment,
    "interval": run_interval_sweep,
}


def run(spec: SweepSpec) -> SweepTable:
    try:
        runner = RUNNERS[spec.experiment]
    except KeyError:
        raise ValueError(f"unknown experiment {spec.experiment!r}") from None
    return runner(spec)


def unimodal(values: Sequence[float]) -> bool:
    """Non-decreasing up to the (first) maximum, non-increasing after it."""
    vals = np.asarray(values, dtype=float)
    peak = int(np.argmax(vals))
    d = np.diff(vals)
    return bool(np.all(d[:peak] >= 0) and np.all(d[peak:] <= 0))
