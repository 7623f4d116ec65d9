"""Exception types shared across the package."""


class SimulationError(Exception):
    """Base class for all package-specific errors."""


class SizingError(SimulationError):
    """A requested composite space exceeds the configured dimension cap."""


class ContractViolation(SimulationError):
    """An input failed a numerical precondition (hermiticity, unitarity, norm)."""


class TruncationError(SimulationError):
    """Truncation leakage exceeded its bound.

    Carries a suggestion for a larger truncation when one can be estimated.
    """

    def __init__(self, message, suggested_n_max=None, suggested_k_max=None):
        super().__init__(message)
        self.suggested_n_max = suggested_n_max
        self.suggested_k_max = suggested_k_max


class DegeneratePostSelection(SimulationError):
    """Post-selection on an outcome whose probability is numerically zero."""


class ConfigError(SimulationError):
    """An experiment configuration failed validation."""
