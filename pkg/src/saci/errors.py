"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration (bad layer sizes, unknown option, ...)."""


class ShapeError(ValueError):
    """Array shapes inconsistent with the declared network or batch."""


class NumericError(ArithmeticError):
    """Non-finite values where finite ones are required; the step is refused."""


class UsageError(RuntimeError):
    """API misuse: stepping a finished episode, empty batch, wrong mode."""


class CheckpointError(RuntimeError):
    """Corrupt checkpoint file or incompatible tensor shapes."""


class ProtocolError(RuntimeError):
    """Malformed or out-of-sequence wire message. Recoverable by the caller."""
