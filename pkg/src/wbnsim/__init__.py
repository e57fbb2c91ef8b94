"""Simulator and closed-form analytics for consensus over wireless links."""

__version__ = "0.1.0"

from .analytics import (  # noqa: E402
    IntervalModel,
    ViabilityResult,
    comm_complexity,
    latency,
    min_viable_power,
    optimal_interval,
    p_round,
    spectrum_requirement,
    throughput,
)
from .consensus import (  # noqa: E402
    ByzantineBehavior,
    ConsensusConfig,
    Mechanism,
    RoundResult,
    quorum,
    run_pbft,
    run_pow,
    run_raft,
    run_round,
)
from .radio import (  # noqa: E402
    ChannelParams,
    Deployment,
    Fault,
    Jammer,
    Node,
    Role,
    coverage_set,
    flood_reach,
    link_ok,
    place_nodes,
    received_power,
)
