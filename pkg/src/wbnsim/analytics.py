"""Closed-form communication costs, viable Tx power, and the
transmission-interval throughput / latency model for wireless PBFT."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .consensus import Mechanism
from .errors import DivergentLatencyError, InfeasibleError
from .radio import MIN_DISTANCE, ChannelParams

DEFAULT_R_MAX = 1000.0  # m, cap on the leader's coverage radius


def _check_n(n) -> None:
    if np.min(n) < 1:
        raise ValueError(f"N must be >= 1, got {np.min(n)}")


def comm_complexity(mechanism: Mechanism, n):
    """Receptions per round (consensus + replication).

    Accepts an int or an integer array (elementwise); Python ints never overflow.
    """
    _check_n(n)
    if mechanism is Mechanism.PBFT:
        return 2 * n * n + n
    return 2 * n


def spectrum_requirement(mechanism: Mechanism, n):
    """Transmission slots per round, assuming single-hop coverage."""
    _check_n(n)
    if mechanism is Mechanism.PBFT:
        return 2 * n + 1
    if mechanism is Mechanism.RAFT:
        return n + 1
    return 2 if np.ndim(n) == 0 else np.full_like(n, 2)


# --- viability ----------------------------------------------------------------


@dataclass(frozen=True)
class ViabilityResult:
    p1_star: float  # dBm, leader
    p2_star: float  # dBm, replicas
    r_star: float  # m

    def feasible(self, r_max: float = DEFAULT_R_MAX) -> bool:
        return self.r_star <= r_max


def required_radius(f: int, density: float) -> float:
    """Radius whose disk holds 3f+1 nodes in expectation at the given density."""
    if f < 0:
        raise ValueError("f must be >= 0")
    if not density > 0:
        raise ValueError("density must be > 0")
    return math.sqrt((3 * f + 1) / (math.pi * density))


def power_for_range(distance: float, ch: ChannelParams) -> float:
    """Tx power (dBm) that lands exactly on the Rx sensitivity at ``distance``."""
    d = max(distance, MIN_DISTANCE)
    return ch.rx_sensitivity + ch.reference_loss + 10.0 * ch.pathloss_exponent * math.log10(d)


def min_viable_power(
    f: int, density: float, ch: ChannelParams, r_max: float = DEFAULT_R_MAX
) -> ViabilityResult:
    """Minimum leader and replica powers for a viable wireless PBFT network.

    The leader must reach the radius holding 3f+1 nodes on average; replicas
    must span that disk's diameter. Raises :class:`InfeasibleError` when the
    radius exceeds ``r_max``.
    """
    r = required_radius(f, density)
    if r > r_max:
        raise InfeasibleError(f"required radius {r:.6g} m exceeds r_max={r_max:g} m (f={f}, density={density:g})")
    return ViabilityResult(power_for_range(r, ch), power_for_range(2.0 * r, ch), r)


# --- interval model -------------------------------------------------------------


@dataclass(frozen=True)
class IntervalModel:
    """Per-link success ``1 - exp(-v / tau)``; ``tau = 0`` means every link
    succeeds for any positive interval."""

    tau: float = 1.0
    block_txns: int = 1

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if self.block_txns < 1:
            raise ValueError("block_txns must be >= 1")

    def link_success(self, v: float) -> float:
        if v <= 0:
            return 0.0
        if self.tau == 0:
            return 1.0
        return -math.expm1(-v / self.tau)


def _binom_pmf(n: int, p: float) -> np.ndarray:
    k = np.arange(n + 1)
    coef = np.array([math.comb(n, int(i)) for i in k], dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = coef * np.power(p, k) * np.power(1.0 - p, n - k)
    return np.nan_to_num(out)


def _binom_tail(n: int, p: float, k: int) -> float:
    """P(Binomial(n, p) >= k)."""
    if k <= 0:
        return 1.0
    if k > n:
        return 0.0
    return float(_binom_pmf(n, p)[k:].sum())


@lru_cache(maxsize=65536)
def round_success_probability(n: int, f: int, p: float) -> float:
    """Probability that at least 2f+1 of n PBFT nodes confirm when every
    reception succeeds independently with probability ``p``.

    Exact for the i.i.d. link model: K nodes hold the pre-prepare (leader plus
    Binomial(n-1, p) replicas); given K, each holder is prepared independently
    when it hears >= 2f of the other K-1 prepares, so the prepared count M is
    Binomial(K, .); the confirmed count given M is Binomial(M, .) likewise.
    """
    if n < 3 * f + 1:
        raise ValueError(f"need n >= 3f+1, got n={n}, f={f}")
    need = 2 * f + 1
    total = 0.0
    for k_rep, w_k in enumerate(_binom_pmf(n - 1, p)):
        if w_k == 0.0:
            continue
        k = k_rep + 1
        prep = _binom_tail(k - 1, p, 2 * f)
        for m, w_m in enumerate(_binom_pmf(k, prep)):
            if m < need or w_m == 0.0:
                continue
            conf = _binom_tail(m - 1, p, 2 * f)
            total += w_k * w_m * _binom_tail(m, conf, need)
    return min(1.0, total)


def round_duration(v: float, n: int) -> float:
    return v * spectrum_requirement(Mechanism.PBFT, n)


def p_round(v: float, n: int, f: int, model: IntervalModel) -> float:
    return round_success_probability(n, f, model.link_success(v))


def throughput(v: float, n: int, f: int, model: IntervalModel) -> float:
    """Committed transactions per second at slot length ``v``."""
    if not v > 0:
        raise ValueError("v must be > 0")
    return model.block_txns * p_round(v, n, f, model) / round_duration(v, n)


def latency(v: float, n: int, f: int, model: IntervalModel) -> float:
    """Expected confirmation time with failed rounds retried (geometric)."""
    if not v > 0:
        raise ValueError("v must be > 0")
    p = p_round(v, n, f, model)
    if p <= 0.0:
        raise DivergentLatencyError(f"round success probability is 0 at v={v:g} (n={n}, f={f})")
    return round_duration(v, n) / p


def optimal_interval(
    n: int, f: int, model: IntervalModel, v_grid: Sequence[float]
) -> tuple[float, float]:
    """Grid argmax of throughput; ties go to the smaller interval."""
    grid = [float(v) for v in v_grid]
    if not grid:
        raise ValueError("v_grid must be non-empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("v_grid must be strictly ascending")
    tps = [throughput(v, n, f, model) for v in grid]
    best = int(np.argmax(tps))
    return grid[best], tps[best]


def default_interval_grid(tau: float = 1.0, points: int = 401) -> np.ndarray:
    scale = tau if tau > 0 else 1.0
    return np.logspace(-2, 2, points) * scale


def default_density_grid(points: int = 31) -> np.ndarray:
    return np.logspace(-4, -1, points)
