"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration (counts, capacities, parse errors)."""


class InfeasibleTimeError(ValueError):
    """A transmission time too small to evaluate: the rate inversion would overflow.

    Raised instead of propagating inf/nan when an exponent exceeds the
    configured cap (default 700 nats).
    """


class UnboundedTimeError(ValueError):
    """No finite energy-optimal time exists (zero circuit power)."""


class InfeasibleError(RuntimeError):
    """The instance admits no feasible allocation (payloads undeliverable)."""


class NumericError(RuntimeError):
    """A numerical routine failed to converge or to bracket a root."""


class ModelError(RuntimeError):
    """A physical invariant of the model was violated at an evaluated point."""
