import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import factorial, genlaguerre

from conftest import random_density_state
from wigharm.floquet import (build_floquet, displacement_matrix,
                             kick_guard_dim, step, step_inverse,
                             unitarity_defect)
from wigharm.harmonics import harmonic_weights
from wigharm.params import InitialSpec, ModelParams, TruncationError, \
    TruncationPolicy
from wigharm.states import DensityState, build_initial
from wigharm.validate import check_kick_unitarity


def make_op(omega0=1.0, hbar=1.0, g0=1.0, dim=64, tail_tol=1e-6):
    p = ModelParams(omega0=omega0, hbar=hbar, g0=g0,
                    trunc=TruncationPolicy(dim=dim, tail_tol=tail_tol))
    return build_floquet(p)


class TestDisplacementMatrix:
    def test_zero_argument_is_identity(self):
        assert np.array_equal(displacement_matrix(0.0, 16),
                              np.eye(16, dtype=complex))

    @pytest.mark.parametrize("lam", [0.3 + 0.4j, 2j, 1.5, -0.7 + 2.1j])
    def test_matches_reference_formula(self, lam):
        dim = 12
        ref = np.zeros((dim, dim), dtype=complex)
        x = abs(lam) ** 2
        for p in range(dim):
            for q in range(dim):
                if p >= q:
                    d = p - q
                    ref[p, q] = (np.sqrt(factorial(q) / factorial(p))
                                 * lam ** d * np.exp(-x / 2)
                                 * genlaguerre(q, d)(x))
                else:
                    d = q - p
                    ref[p, q] = (np.sqrt(factorial(p) / factorial(q))
                                 * (-np.conj(lam)) ** d * np.exp(-x / 2)
                                 * genlaguerre(p, d)(x))
        got = displacement_matrix(lam, dim)
        assert np.max(np.abs(got - ref)) < 5e-13

    def test_small_argument_series(self):
        # K ~ I + lam a^dag - lam* a with O(|lam|^2) elementwise error
        dim, lam = 32, 1e-4j
        d = displacement_matrix(lam, dim)
        a = np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)
        approx = np.eye(dim) + lam * a.conj().T - np.conj(lam) * a
        assert np.max(np.abs(d - approx)) <= 5 * abs(lam) ** 2 * dim

    def test_strong_kick_stays_finite_and_unitary(self):
        # lam^2 = 225 exercises the rescaled Laguerre recurrence
        d = displacement_matrix(15j, 2048)
        assert np.all(np.isfinite(d.real)) and np.all(np.isfinite(d.imag))
        guard = kick_guard_dim(15j, 2048)
        sub = d[:, :guard]
        gram = sub.conj().T @ sub
        gram[np.diag_indices(guard)] -= 1.0
        assert np.max(np.abs(gram)) < 1e-10


class TestFloquetOperator:
    def test_g0_zero_kick_identity(self):
        op = make_op(g0=0.0)
        assert np.array_equal(op.kick_matrix, np.eye(64, dtype=complex))

    def test_free_phases(self):
        op = make_op(omega0=1.3, hbar=0.4, dim=8)
        n = np.arange(8)
        assert np.allclose(op.free_phases, 1.3 * n + 0.4 * n ** 2, atol=0)

    @pytest.mark.parametrize("g0,hbar,dim", [(1.5, 1.0, 1024),
                                             (2.0, 1.0, 1024),
                                             (1.5, 0.1, 1536)])
    def test_unitarity_defect_guarded(self, g0, hbar, dim):
        op = make_op(g0=g0, hbar=hbar, dim=dim)
        assert unitarity_defect(op) <= 1e-10

    def test_corrupted_kick_fails_unitarity(self):
        op = make_op(g0=1.0, dim=128)
        op.kick_matrix[3, 5] += 1e-4
        ok, detail = check_kick_unitarity(op)
        assert not ok


class TestStep:
    def test_ground_state_one_step_equals_kick_column(self):
        # phi_0 = 0, so one period acting on |0> is the kick's first column
        op = make_op(omega0=1.0, hbar=1.0, g0=2.0, dim=256)
        state = DensityState.fock_mixture([1.0], 256)
        out = step(state, op)
        assert np.allclose(out.vectors[0], op.kick_matrix[:, 0], atol=1e-15)

    def test_free_evolution_preserves_harmonics(self):
        op = make_op(g0=0.0, omega0=0.9, hbar=0.3)
        state = random_density_state(5, 64, k=2, support=48)
        ref = harmonic_weights(state)
        for _ in range(10):
            state = step(state, op)
            spec = harmonic_weights(state)
            assert spec.m2 == pytest.approx(ref.m2, rel=1e-13)

    def test_roundtrip_exact(self):
        op = make_op(g0=0.8, dim=256)
        guard = kick_guard_dim(op.lam, 256)
        state = random_density_state(7, 256, k=2, support=guard)
        rt = step_inverse(step(state, op), op)
        assert np.max(np.abs(rt.vectors - state.vectors)) <= 1e-12

    def test_inverse_of_free_is_phase_conjugation(self):
        op = make_op(g0=0.0)
        state = random_density_state(3, 64, support=48)
        back = step_inverse(state, op)
        expected = state.vectors * np.exp(1j * op.free_phases)
        assert np.max(np.abs(back.vectors - expected)) < 1e-15

    def test_weights_unchanged(self):
        op = make_op(g0=0.5, dim=128)
        state = random_density_state(9, 128, k=3, support=30)
        out = step(state, op)
        assert np.array_equal(out.weights, state.weights)

    def test_tail_violation_aborts(self):
        p = ModelParams(omega0=1.0, hbar=1.0, g0=2.5,
                        trunc=TruncationPolicy(dim=24, tail_tol=1e-10))
        op = build_floquet(p)
        state = DensityState.fock_mixture([1.0], 24)
        with pytest.raises(TruncationError):
            for _ in range(20):
                state = step(state, op)

    def test_dim_mismatch_rejected(self):
        op = make_op(dim=32)
        state = random_density_state(1, 16)
        with pytest.raises(ValueError, match="dim"):
            step(state, op)


class TestNormPreservation:
    def test_echo_norms_at_strong_kick(self):
        # short echo at g0 = 2; the 100-period version is in acceptance
        p = ModelParams(omega0=1.0, hbar=1.0, g0=2.0,
                        trunc=TruncationPolicy(dim=1024, tail_tol=1e-3))
        state = build_initial(InitialSpec.from_delta_cap(1.0, 1.0), p)
        op = build_floquet(p)
        for _ in range(12):
            state = step(state, op)
        for _ in range(12):
            state = step_inverse(state, op)
        norms = np.linalg.norm(state.vectors, axis=1)
        assert np.max(np.abs(norms - 1.0)) <= 1e-10

    @given(seed=st.integers(0, 1000))
    @settings(max_examples=10, deadline=None)
    def test_purity_invariant_under_evolution(self, seed):
        from wigharm.states import purity
        op = make_op(g0=0.5, dim=256)
        state = random_density_state(seed, 256, k=2, support=16)
        p0 = purity(state)
        for _ in range(12):
            state = step(state, op)
        assert purity(state) == pytest.approx(p0, abs=1e-8)
