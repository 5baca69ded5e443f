"""Mixed quantum states as weighted ensembles of pure Fock-basis vectors.

A state is stored as K member vectors with probabilities, never as a dense
density matrix; the matrix is materialized on demand only where an analysis
needs it. All operations are pure functions returning new states.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .params import InitialSpec, ModelParams, TruncationError

#: members are kept until their cumulative weight reaches 1 - MEMBER_CUTOFF;
#: the discarded remainder is recorded on the state and in run manifests.
MEMBER_CUTOFF = 1e-10

NORM_TOL = 1e-10
WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class DensityState:
    """Weighted pure-state ensemble on a truncated Fock space.

    ``vectors`` has shape (K, dim): row k is the amplitude vector of member
    k with probability ``weights[k]``. Instances are immutable; evolution
    produces new instances and may skip re-validation (roundoff drifts a
    hair per step), so user-built states should go through
    :meth:`from_members`, which validates.
    """
    weights: np.ndarray
    vectors: np.ndarray
    dim: int
    discarded_weight: float = 0.0

    @classmethod
    def from_members(cls, weights, vectors, *, discarded_weight: float = 0.0
                     ) -> "DensityState":
        weights = np.asarray(weights, dtype=float)
        vectors = np.atleast_2d(np.asarray(vectors, dtype=complex))
        state = cls(weights=weights, vectors=vectors, dim=vectors.shape[1],
                    discarded_weight=discarded_weight)
        state.check()
        return state

    @classmethod
    def pure(cls, vector) -> "DensityState":
        vector = np.asarray(vector, dtype=complex)
        return cls.from_members(np.array([1.0]), vector[None, :])

    @classmethod
    def fock_mixture(cls, weights, dim: int, *, discarded_weight: float = 0.0
                     ) -> "DensityState":
        """Diagonal mixture of the first len(weights) Fock states."""
        weights = np.asarray(weights, dtype=float)
        k = weights.size
        if k > dim:
            raise ValueError(f"{k} Fock members do not fit in dim {dim}")
        vectors = np.zeros((k, dim), dtype=complex)
        vectors[np.arange(k), np.arange(k)] = 1.0
        return cls.from_members(weights, vectors,
                                discarded_weight=discarded_weight)

    @property
    def n_members(self) -> int:
        return self.weights.size

    def check(self) -> None:
        """Raise if the ensemble invariants are violated."""
        if self.vectors.shape != (self.weights.size, self.dim):
            raise ValueError("weights/vectors shape mismatch")
        if np.any(self.weights < 0):
            raise ValueError("negative ensemble weight")
        total = math.fsum(self.weights.tolist())
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {total}, not 1")
        norms = np.linalg.norm(self.vectors, axis=1)
        worst = float(np.max(np.abs(norms - 1.0))) if norms.size else 0.0
        if worst > NORM_TOL:
            raise ValueError(f"member vector norm off by {worst:.3e}")

    def density_matrix(self) -> np.ndarray:
        """Dense rho[n, n'] = sum_k p_k psi_k[n] psi_k[n']*. O(dim^2 K)."""
        weighted = self.vectors.T * self.weights
        return weighted @ self.vectors.conj()

    def occupations(self) -> np.ndarray:
        """Weighted occupation probability of each Fock level."""
        return self.weights @ (self.vectors.real ** 2 + self.vectors.imag ** 2)

    def tail_mass(self, guard_start: int) -> float:
        """Occupation mass at and above basis index ``guard_start``."""
        occ = self.occupations()
        return float(np.sum(occ[guard_start:]))


def thermal_weights(nbar: float, cutoff: float = MEMBER_CUTOFF
                    ) -> tuple[np.ndarray, float]:
    """Geometric Fock weights with mean occupation nbar, truncated once the
    cumulative weight reaches 1 - cutoff. Returns (renormalized weights,
    discarded weight)."""
    if nbar == 0.0:
        return np.array([1.0]), 0.0
    ratio = nbar / (1.0 + nbar)
    # tail after k members is ratio**k
    k = int(np.ceil(np.log(cutoff) / np.log(ratio)))
    n = np.arange(k)
    weights = (1.0 / (1.0 + nbar)) * ratio ** n
    discarded = ratio ** k
    return weights / weights.sum(), discarded


def required_dim(nbar: float, tail_tol: float) -> int:
    """Smallest dim that holds the thermal members and keeps the top-5%
    occupation tail below tail_tol."""
    k = thermal_weights(nbar)[0].size
    if nbar == 0.0:
        return max(2, k)
    n_tail = int(np.ceil(nbar * np.log(1.0 / tail_tol) / 0.95)) + 1
    return max(k, n_tail, 2)


def build_initial(spec: InitialSpec, params: ModelParams) -> DensityState:
    """Isotropic coherent-state mixture of width Delta as a Fock-diagonal
    thermal mixture with mean occupation Delta/hbar.

    Delta = 0 yields the pure ground state. Raises TruncationError when the
    configured dim cannot hold the occupation tail, reporting the dim that
    would suffice.
    """
    spec.check_consistent(params.hbar)
    nbar = spec.delta_cap / params.hbar
    weights, discarded = thermal_weights(nbar)
    dim = params.trunc.dim
    need = required_dim(nbar, params.trunc.tail_tol)
    if need > dim:
        raise TruncationError(
            f"dim {dim} too small for Delta/hbar = {nbar:.6g}: "
            f"need dim >= {need}",
            dim=dim, required_dim=need)
    state = DensityState.fock_mixture(weights, dim,
                                      discarded_weight=discarded)
    tail = state.tail_mass(params.trunc.guard_start)
    if tail > params.trunc.tail_tol:
        raise TruncationError(
            f"initial occupation tail {tail:.3e} exceeds tail_tol "
            f"{params.trunc.tail_tol:.3e} at dim {dim}; need dim >= {need}",
            tail_mass=tail, dim=dim, required_dim=need)
    return state


def mean_occupation(state: DensityState) -> float:
    """<n> = sum_k p_k sum_n n |psi_k[n]|^2."""
    occ = state.occupations()
    return float(occ @ np.arange(state.dim))


def purity(state: DensityState) -> float:
    """Tr rho^2 via pairwise member overlaps; always in (0, 1]."""
    gram = state.vectors.conj() @ state.vectors.T
    overlap2 = gram.real ** 2 + gram.imag ** 2
    return float(state.weights @ overlap2 @ state.weights)


def apply_unitary_to_members(state: DensityState, u: np.ndarray
                             ) -> DensityState:
    """Map every member vector through the same unitary (no validation)."""
    return replace(state, vectors=state.vectors @ u.T)
