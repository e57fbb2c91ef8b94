"""Exception and warning types raised by wbnsim."""


class WbnsimError(Exception):
    """Base class for simulator errors."""


class ConfigMismatchError(WbnsimError, ValueError):
    """Deployment size or configuration cannot satisfy the mechanism's quorum rule."""


class NoMinerReachedError(WbnsimError):
    """The PoW client broadcast reached no miner."""


class InfeasibleError(WbnsimError):
    """Required coverage radius exceeds the allowed maximum."""


class DivergentLatencyError(WbnsimError, ArithmeticError):
    """Round success probability is zero, so expected latency is unbounded."""


class ConfigError(WbnsimError, ValueError):
    """Rejected run configuration (unknown key, bad value, unreadable file)."""


class DegenerateDistanceWarning(UserWarning):
    """Transmitter and receiver coincide; distance was clamped to 1 m."""
