"""``wbnsim`` command line: one subcommand per experiment plus a single-round probe."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import config as config_mod
from . import csvio, experiments, radio
from .consensus import Mechanism, quorum, run_round
from .errors import ConfigError, WbnsimError
from .experiments import SweepTable

SUBCOMMANDS = {
    "complexity": "complexity",
    "viability": "viability",
    "jam": "jamming",
    "interval": "interval",
    "round": "round",
}

HELP = {
    "complexity": "communication complexity and spectrum requirement over N",
    "viability": "minimum viable leader/replica Tx power over node density",
    "jam": "Raft under a jammer across SIR thresholds (Monte Carlo)",
    "interval": "PBFT throughput/latency over the transmission interval",
    "round": "run one consensus round and dump its slot trace",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value config file")
    common.add_argument("--seed", metavar="U64", help="base seed")
    common.add_argument("--trials", metavar="K", help="Monte Carlo trials")
    common.add_argument("--out", metavar="PATH", help="output CSV (default: stdout)")
    common.add_argument("--preset", choices=sorted(config_mod.PRESETS), help="figure preset")
    common.add_argument(
        "--set", dest="overrides", action="append", metavar="KEY=VALUE", default=[],
        help="override any config key (repeatable)",
    )
    parser = argparse.ArgumentParser(prog="wbnsim", description="Wireless blockchain network simulator.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=HELP[name], description=HELP[name])
    return parser


def _round_tables(cfg: config_mod.RunConfig) -> SweepTable:
    role = radio.Role.MINER if cfg.mechanism is Mechanism.POW else radio.Role.REPLICA
    dep = radio.place_nodes(cfg.nodes, cfg.radius, cfg.seed, cfg.tx_power, role)
    n = len(dep)
    byz = range(n - cfg.byzantine, n)
    crashed = range(n - cfg.byzantine - cfg.crashed, n - cfg.byzantine)
    dep = dep.with_faults(crashed=crashed, byzantine=byz)
    ccfg = config_mod.consensus_config(cfg)
    res = run_round(dep, config_mod.channel(cfg), ccfg, config_mod.jammer(cfg), cfg.seed)

    meta = {"experiment": "round", "build": experiments.BUILD_ID}
    rows = [(e.stage, e.slot, e.sender, " ".join(str(r) for r in e.recipients)) for e in res.stage_trace]
    table = SweepTable(("stage", "slot", "sender", "recipients"), rows, meta)
    summary = (
        res.success,
        res.confirming_nodes,
        quorum(cfg.mechanism, cfg.fault_budget, n),
        res.tx_events,
        res.rx_events,
        res.slots_elapsed,
        res.elapsed,
        res.timed_out,
    )
    table.extras["summary"] = SweepTable(
        ("success", "confirming_nodes", "quorum", "tx_events", "rx_events", "slots_elapsed", "elapsed_s", "timed_out"),
        [summary],
        dict(meta),
    )
    return table


def execute(cfg: config_mod.RunConfig) -> SweepTable:
    if cfg.experiment == "round":
        table = _round_tables(cfg)
    else:
        table = experiments.run(config_mod.sweep_spec(cfg))
    echo = {f"config.{k}": v for k, v in config_mod.echo(cfg).items()}
    for t in (table, *table.extras.values()):
        t.metadata.update(echo)
    return table


def extra_path(out: Path, name: str) -> Path:
    return out.with_name(f"{out.stem}.{name}{out.suffix or '.csv'}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    flags = {k: getattr(args, k) for k in ("seed", "trials", "out") if getattr(args, k) is not None}
    try:
        cfg = config_mod.parse_config(
            SUBCOMMANDS[args.command],
            config_path=args.config,
            preset=args.preset,
            flags=flags,
            overrides=config_mod.parse_set_args(args.overrides),
        )
        table = execute(cfg)
        if cfg.out is None:
            sys.stdout.write(csvio.dumps(table))
        else:
            out = Path(cfg.out)
            for name, extra in table.extras.items():
                csvio.write_csv(extra, extra_path(out, name))
            csvio.write_csv(table, out)
    except (ConfigError, WbnsimError, ValueError, OSError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"wbnsim: error: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
