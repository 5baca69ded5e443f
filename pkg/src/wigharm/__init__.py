"""Kicked quartic oscillator toolkit: Wigner-harmonic complexity, echo
reversibility, and classical ensemble dynamics."""

__version__ = "0.1.0"

from .params import InitialSpec, ModelParams, TruncationError, TruncationPolicy
from .states import DensityState, build_initial, mean_occupation, purity

__all__ = [
    "__version__",
    "InitialSpec", "ModelParams", "TruncationError", "TruncationPolicy",
    "DensityState", "build_initial", "mean_occupation", "purity",
]
