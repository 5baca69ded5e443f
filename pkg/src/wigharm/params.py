"""Model parameters, truncation policy, and initial-state specification.

These types are shared by every other module; keep them small and immutable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class TruncationError(RuntimeError):
    """Fock-space truncation too small for the requested state or run."""

    def __init__(self, message: str, *, tail_mass: float | None = None,
                 dim: int | None = None, required_dim: int | None = None):
        super().__init__(message)
        self.tail_mass = tail_mass
        self.dim = dim
        self.required_dim = required_dim


@dataclass(frozen=True)
class TruncationPolicy:
    """Fock-space size and the tail-mass budget that certifies a run.

    After any evolution step the total occupation probability in the top 5%
    of basis states must stay below ``tail_tol``, otherwise the run is
    invalid and aborts.
    """
    dim: int
    tail_tol: float = 1e-8

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError(f"dim must be >= 2, got {self.dim}")
        if not self.tail_tol > 0:
            raise ValueError(f"tail_tol must be > 0, got {self.tail_tol}")

    @property
    def guard_start(self) -> int:
        """First basis index of the guarded top-5% block."""
        return min(self.dim - 1, int(np.ceil(0.95 * self.dim)))


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless parameters of the kicked quartic oscillator.

    The kick period is the unit of time and must stay 1; ``g0`` is the
    kick strength and ``hbar`` the effective Planck constant.
    """
    omega0: float
    hbar: float
    g0: float
    trunc: TruncationPolicy
    period: float = 1.0

    def __post_init__(self):
        if not self.hbar > 0:
            raise ValueError(f"hbar must be > 0, got {self.hbar}")
        if self.period != 1.0:
            raise ValueError("the kick period is fixed to 1 in these units")
        if self.g0 < 0:
            raise ValueError(f"g0 must be >= 0, got {self.g0}")


@dataclass(frozen=True)
class InitialSpec:
    """Width of the isotropic coherent-state mixture.

    ``delta_cap`` is the mixture width Delta (action units); ``delta_small``
    is the convenience value delta = Delta + hbar/2, the width of the
    corresponding Gaussian phase-space distribution. The two are bound
    together at construction, via one of the classmethods, so that either
    parametrization yields the identical state.
    """
    delta_cap: float
    delta_small: float

    def __post_init__(self):
        if self.delta_cap < 0:
            raise ValueError(f"delta_cap must be >= 0, got {self.delta_cap}")

    @classmethod
    def from_delta_cap(cls, delta_cap: float, hbar: float) -> "InitialSpec":
        return cls(delta_cap=delta_cap, delta_small=delta_cap + hbar / 2)

    @classmethod
    def from_delta_small(cls, delta_small: float, hbar: float) -> "InitialSpec":
        delta_cap = delta_small - hbar / 2
        if delta_cap < 0:
            raise ValueError(
                f"delta_small={delta_small} implies a negative mixture width "
                f"at hbar={hbar}; need delta_small >= hbar/2")
        return cls(delta_cap=delta_cap, delta_small=delta_small)

    def check_consistent(self, hbar: float) -> None:
        # one ulp of slack: (delta - hbar/2) + hbar/2 need not round-trip
        expect = self.delta_cap + hbar / 2
        if abs(self.delta_small - expect) > 4e-16 * max(1.0, expect):
            raise ValueError(
                "inconsistent InitialSpec: delta_small must equal "
                f"delta_cap + hbar/2 ({self.delta_small} != {expect})")


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator so trajectory streams are reproducible
    from the recorded seed alone, independent of scheduling."""
    return np.random.Generator(np.random.Philox(seed))
