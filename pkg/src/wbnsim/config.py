"""Flat ``key = value`` run configuration.

Resolution order, later wins: built-in defaults, ``--preset``, the config
file, the dedicated CLI flags, then ``--set key=value`` overrides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Callable, Mapping, Optional

import numpy as np

from .analytics import IntervalModel
from .consensus import ByzantineBehavior, ConsensusConfig, Mechanism
from .errors import ConfigError
from .experiments import SweepSpec
from .radio import ChannelParams, Jammer

EXPERIMENTS = ("complexity", "viability", "jamming", "interval", "round")


def _int(text: str) -> int:
    return int(text.strip())


def _float(text: str) -> float:
    return float(text.strip())


def _opt_float(text: str) -> Optional[float]:
    t = text.strip().lower()
    return None if t in ("", "none", "auto") else float(t)


def _opt_int(text: str) -> Optional[int]:
    t = text.strip().lower()
    return None if t in ("", "none") else int(t)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_bool(text: str) -> Optional[bool]:
    t = text.strip().lower()
    return None if t in ("", "none", "auto") else _bool(t)


def _int_list(text: str) -> tuple[int, ...]:
    """Comma list; ``a..b`` expands to the inclusive range."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.split(",") if p.strip())


def _mechanisms(text: str) -> tuple[Mechanism, ...]:
    return tuple(Mechanism(p.strip().lower()) for p in text.split(",") if p.strip())


def _mechanism(text: str) -> Mechanism:
    return Mechanism(text.strip().lower())


def _behavior(text: str) -> ByzantineBehavior:
    return ByzantineBehavior(text.strip().lower())


def _str(text: str) -> str:
    return text.strip()


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "complexity"
    seed: int = 0
    trials: int = 100
    out: Optional[str] = None
    # sweep ranges
    mechanisms: tuple[Mechanism, ...] = (Mechanism.PBFT, Mechanism.RAFT, Mechanism.POW)
    n_values: tuple[int, ...] = tuple(range(2, 101))
    f_values: tuple[int, ...] = (100, 1000)
    f_auto: bool = True
    lambda_min: float = 1e-4
    lambda_max: float = 1e-1
    lambda_points: int = 31
    sir_thresholds: tuple[float, ...] = (-12.0, -10.0, -8.0, -6.0, -4.0)
    v_min: Optional[float] = None  # default 0.01 * tau
    v_max: Optional[float] = None  # default 100 * tau
    v_points: int = 401
    map_trials: int = 0
    # scenario
    nodes: int = 300
    radius: float = 100.0
    tx_power: float = 20.0
    # channel
    pathloss_exponent: float = 4.0
    reference_loss: float = 0.0
    rx_sensitivity: float = -84.5
    sir_threshold: float = 0.0
    noise_floor: float = -math.inf
    # jammer (None -> on for jamming, off otherwise; position (R/2, 0); node power)
    jammer_active: Optional[bool] = None
    jammer_x: Optional[float] = None
    jammer_y: Optional[float] = None
    jammer_power: Optional[float] = None
    # analytics
    tau: float = 1.0
    block_txns: int = 1
    r_max: float = 1000.0
    # single round probe
    mechanism: Mechanism = Mechanism.PBFT
    fault_budget: int = 0
    interval: float = 1.0
    max_slots_timeout: Optional[int] = None
    byzantine_behavior: ByzantineBehavior = ByzantineBehavior.SILENT_DROP
    byzantine: int = 0
    crashed: int = 0


_PARSERS: dict[str, Callable[[str], Any]] = {
    "experiment": _str,
    "seed": _int,
    "trials": _int,
    "out": lambda t: t.strip() or None,
    "mechanisms": _mechanisms,
    "n_values": _int_list,
    "f_values": _int_list,
    "f_auto": _bool,
    "lambda_min": _float,
    "lambda_max": _float,
    "lambda_points": _int,
    "sir_thresholds": _float_list,
    "v_min": _opt_float,
    "v_max": _opt_float,
    "v_points": _int,
    "map_trials": _int,
    "nodes": _int,
    "radius": _float,
    "tx_power": _float,
    "pathloss_exponent": _float,
    "reference_loss": _float,
    "rx_sensitivity": _float,
    "sir_threshold": _float,
    "noise_floor": _float,
    "jammer_active": _opt_bool,
    "jammer_x": _opt_float,
    "jammer_y": _opt_float,
    "jammer_power": _opt_float,
    "tau": _float,
    "block_txns": _int,
    "r_max": _float,
    "mechanism": _mechanism,
    "fault_budget": _int,
    "interval": _float,
    "max_slots_timeout": _opt_int,
    "byzantine_behavior": _behavior,
    "byzantine": _int,
    "crashed": _int,
}
assert set(_PARSERS) == {f.name for f in fields(RunConfig)}

PRESETS: dict[str, dict[str, str]] = {
    "fig2": {"mechanisms": "pbft,raft,pow", "n_values": "2..100"},
    "fig3": {
        "pathloss_exponent": "4",
        "rx_sensitivity": "-84.5",
        "reference_loss": "0",
        "f_values": "100,1000",
        "f_auto": "true",
        "lambda_min": "1e-4",
        "lambda_max": "1e-1",
        "r_max": "1000",
    },
    "fig4": {
        "nodes": "300",
        "radius": "100",
        "pathloss_exponent": "2.5",
        "rx_sensitivity": "-inf",
        "sir_thresholds": "-12,-10,-8,-6,-4",
        "trials": "100",
        "jammer_x": "auto",
        "jammer_y": "auto",
        "jammer_power": "auto",
    },
    "fig5": {"n_values": "10,15", "f_values": "1,2,3", "tau": "1", "block_txns": "1"},
}


def _check(cond: bool, key: str, constraint: str) -> None:
    if not cond:
        raise ConfigError(f"{key} must be {constraint}")


def validate(cfg: RunConfig) -> RunConfig:
    _check(cfg.experiment in EXPERIMENTS, "experiment", f"one of {', '.join(EXPERIMENTS)}")
    _check(0 <= cfg.seed < 2**64, "seed", "an unsigned 64-bit integer")
    _check(cfg.trials >= 1, "trials", ">= 1")
    _check(cfg.pathloss_exponent > 0, "pathloss_exponent", "> 0")
    _check(not math.isnan(cfg.rx_sensitivity), "rx_sensitivity", "a number")
    _check(math.isfinite(cfg.sir_threshold), "sir_threshold", "finite")
    _check(cfg.nodes >= 1, "nodes", ">= 1")
    _check(cfg.radius > 0, "radius", "> 0")
    _check(len(cfg.mechanisms) > 0, "mechanisms", "non-empty")
    _check(len(cfg.n_values) > 0 and min(cfg.n_values) >= 1, "n_values", "non-empty with every N >= 1")
    _check(len(cfg.f_values) > 0 and min(cfg.f_values) >= 0, "f_values", "non-empty with every f >= 0")
    _check(len(cfg.sir_thresholds) > 0, "sir_thresholds", "non-empty")
    _check(all(math.isfinite(s) for s in cfg.sir_thresholds), "sir_thresholds", "finite")
    _check(0 < cfg.lambda_min <= cfg.lambda_max, "lambda_min", "> 0 and <= lambda_max")
    _check(cfg.lambda_points >= 1, "lambda_points", ">= 1")
    _check(cfg.v_points >= 1, "v_points", ">= 1")
    _check(cfg.v_min is None or cfg.v_min > 0, "v_min", "> 0")
    _check(cfg.v_max is None or cfg.v_max > 0, "v_max", "> 0")
    _check(cfg.map_trials >= 0, "map_trials", ">= 0")
    _check(cfg.tau >= 0, "tau", ">= 0")
    _check(cfg.block_txns >= 1, "block_txns", ">= 1")
    _check(cfg.r_max > 0, "r_max", "> 0")
    _check(cfg.fault_budget >= 0, "fault_budget", ">= 0")
    _check(cfg.interval > 0, "interval", "> 0")
    _check(cfg.max_slots_timeout is None or cfg.max_slots_timeout >= 1, "max_slots_timeout", ">= 1")
    _check(cfg.byzantine >= 0 and cfg.crashed >= 0, "byzantine", ">= 0 (and crashed >= 0)")
    _check(cfg.byzantine + cfg.crashed < cfg.nodes, "byzantine", "plus crashed below nodes (leader stays honest)")
    lo, hi = v_range(cfg)
    _check(lo <= hi, "v_min", "<= v_max")
    return cfg


def apply(cfg: RunConfig, values: Mapping[str, str], source: str = "config") -> RunConfig:
    """Parse string ``values`` into ``cfg``; unknown keys and bad values are rejected."""
    changes = {}
    for key, text in values.items():
        if key not in _PARSERS:
            raise ConfigError(f"unknown key {key!r} in {source}")
        try:
            changes[key] = _PARSERS[key](text)
        except ValueError as exc:
            raise ConfigError(f"invalid value {text!r} for {key} in {source}: {exc}") from None
    return replace(cfg, **changes)


def read_config_file(path) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw.strip()!r}")
        values[key.strip()] = value.strip()
    return values


def parse_set_args(items) -> dict[str, str]:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value
    return out


def parse_config(
    experiment: str,
    config_path=None,
    preset: Optional[str] = None,
    flags: Optional[Mapping[str, str]] = None,
    overrides: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    cfg = RunConfig(experiment=experiment)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"preset must be one of {', '.join(PRESETS)}")
        cfg = apply(cfg, PRESETS[preset], f"preset {preset}")
    if config_path is not None:
        cfg = apply(cfg, read_config_file(config_path), str(config_path))
    cfg = apply(cfg, flags or {}, "command-line flags")
    cfg = apply(cfg, overrides or {}, "--set")
    if cfg.experiment != experiment:
        raise ConfigError(f"experiment must be {experiment!r} for this subcommand")
    return validate(cfg)


def _fmt(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".9g")
    if hasattr(value, "value"):
        return str(value.value)
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def echo(cfg: RunConfig) -> dict[str, str]:
    """Fully-resolved configuration as strings (output path left out so the
    echo depends only on what determines the numbers)."""
    return {f.name: _fmt(getattr(cfg, f.name)) for f in fields(cfg) if f.name != "out"}


# --- conversion into library objects --------------------------------------------


def channel(cfg: RunConfig) -> ChannelParams:
    return ChannelParams(
        pathloss_exponent=cfg.pathloss_exponent,
        reference_loss=cfg.reference_loss,
        rx_sensitivity=cfg.rx_sensitivity,
        sir_threshold=cfg.sir_threshold,
        noise_floor=cfg.noise_floor,
    )


def jammer(cfg: RunConfig) -> Optional[Jammer]:
    active = cfg.jammer_active if cfg.jammer_active is not None else cfg.experiment == "jamming"
    if not active:
        return None
    x = cfg.radius / 2.0 if cfg.jammer_x is None else cfg.jammer_x
    y = 0.0 if cfg.jammer_y is None else cfg.jammer_y
    power = cfg.tx_power if cfg.jammer_power is None else cfg.jammer_power
    return Jammer((x, y), power, True)


def v_range(cfg: RunConfig) -> tuple[float, float]:
    scale = cfg.tau if cfg.tau > 0 else 1.0
    lo = 1e-2 * scale if cfg.v_min is None else cfg.v_min
    hi = 1e2 * scale if cfg.v_max is None else cfg.v_max
    return lo, hi


def sweep_spec(cfg: RunConfig) -> SweepSpec:
    lo, hi = v_range(cfg)
    return SweepSpec(
        experiment=cfg.experiment,
        mechanisms=cfg.mechanisms,
        n_values=cfg.n_values,
        f_values=cfg.f_values,
        f_auto=cfg.f_auto,
        densities=tuple(float(x) for x in np.geomspace(cfg.lambda_min, cfg.lambda_max, cfg.lambda_points)),
        sir_thresholds=cfg.sir_thresholds,
        v_grid=tuple(float(x) for x in np.geomspace(lo, hi, cfg.v_points)),
        trials=cfg.trials,
        base_seed=cfg.seed,
        nodes=cfg.nodes,
        radius=cfg.radius,
        tx_power=cfg.tx_power,
        channel=channel(cfg),
        jammer=jammer(cfg),
        interval_model=IntervalModel(cfg.tau, cfg.block_txns),
        r_max=cfg.r_max,
        map_trials=cfg.map_trials,
    )


def consensus_config(cfg: RunConfig) -> ConsensusConfig:
    return ConsensusConfig(
        mechanism=cfg.mechanism,
        fault_budget=cfg.fault_budget,
        interval=cfg.interval,
        max_slots_timeout=cfg.max_slots_timeout,
        byzantine_behavior=cfg.byzantine_behavior,
    )
