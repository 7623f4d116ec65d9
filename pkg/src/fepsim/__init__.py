"""Truncated-Fock-space simulator of free-electron induced photon correlations."""

__version__ = "0.1.0"

from .tensor_core import (  # noqa: F401
    DensityMatrix,
    HilbertLayout,
    OperatorMatrix,
    PureState,
)
