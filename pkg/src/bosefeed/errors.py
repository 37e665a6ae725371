"""Exception types. The CLI maps each family onto an exit code."""


class BosefeedError(Exception):
    """Base class for all package errors."""


class ConfigError(BosefeedError, ValueError):
    """Invalid parameters or run configuration (exit code 2)."""


class ToleranceError(BosefeedError, RuntimeError):
    """A numerical self-check exceeded its tolerance (exit code 3)."""


class QuadratureError(ToleranceError):
    pass


class TruncationError(ToleranceError):
    pass


class CapacityError(BosefeedError):
    """Requested Fock space exceeds the configured dimension cap (exit code 4)."""

    def __init__(self, dim, cap):
        self.dim = dim
        self.cap = cap
        super().__init__(f"Fock space dimension {dim} exceeds cap {cap}")
