import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wigharm.classical import (ClassicalEnsemble, classical_echo,
                               classical_m2, classical_step,
                               classical_step_inverse, histogram_fidelity,
                               mean_action, mean_action_series, rotate,
                               sample_initial)
from wigharm.params import ModelParams, TruncationPolicy


def make_params(g0=1.5, omega0=1.0):
    return ModelParams(omega0=omega0, hbar=1.0, g0=g0,
                       trunc=TruncationPolicy(dim=2))


class TestSampling:
    def test_mean_action_matches_width(self):
        delta = 0.8
        ens = sample_initial(delta, 200_000, seed=11)
        got = mean_action(ens)
        sigma = delta / math.sqrt(ens.n_traj)   # var(|a|^2) = delta^2
        assert abs(got - delta) < 3 * sigma

    def test_isotropy(self):
        ens = sample_initial(0.5, 100_000, seed=12)
        phase_mean = np.mean(np.exp(1j * np.angle(ens.points)))
        assert abs(phase_mean) < 3 / math.sqrt(ens.n_traj)

    def test_reproducible_from_seed(self):
        a = sample_initial(0.5, 1000, seed=42)
        b = sample_initial(0.5, 1000, seed=42)
        assert np.array_equal(a.points, b.points)

    def test_requires_positive_width(self):
        with pytest.raises(ValueError):
            sample_initial(0.0, 100, seed=1)


class TestMap:
    def test_free_rotation_preserves_action(self):
        p = make_params(g0=0.0)
        ens = sample_initial(0.5, 5000, seed=13)
        stepped = classical_step(ens, p)
        assert np.max(np.abs(np.abs(stepped.points) - np.abs(ens.points))) \
            < 1e-12

    def test_single_step_roundtrip(self):
        p = make_params(g0=2.0)
        ens = sample_initial(1.0, 1000, seed=14)
        back = classical_step_inverse(classical_step(ens, p), p)
        assert np.max(np.abs(back.points - ens.points)) < 1e-12
        assert back.t == ens.t

    def test_pairwise_roundtrip_50(self):
        # map inversion is exact; alternating fwd/inv accumulates only ulps
        p = make_params(g0=2.0)
        ens0 = sample_initial(1.5, 512, seed=15)
        ens = ens0
        for _ in range(50):
            ens = classical_step_inverse(classical_step(ens, p), p)
        assert np.max(np.abs(ens.points - ens0.points)) <= 1e-10

    def test_kick_increments_action_by_g0_squared(self):
        # per-kick gain averages to g0^2 once phases equidistribute
        p = make_params(g0=1.5)
        ens = sample_initial(0.5, 200_000, seed=16)
        for _ in range(4):
            ens = classical_step(ens, p)
        before = mean_action(ens)
        for _ in range(10):
            ens = classical_step(ens, p)
        per_kick = (mean_action(ens) - before) / 10
        assert per_kick == pytest.approx(p.g0 ** 2, rel=0.1)

    def test_mean_action_series_flat_without_kick(self):
        p = make_params(g0=0.0)
        ens = sample_initial(0.5, 20_000, seed=17)
        chain = [ens]
        for _ in range(5):
            chain.append(classical_step(chain[-1], p))
        rows = mean_action_series(chain)
        values = [v for _, v in rows]
        assert max(values) - min(values) < 1e-12


class TestHarmonicEstimator:
    def test_isotropic_consistent_with_zero(self):
        ens = sample_initial(0.5, 20_000, seed=18)
        res = classical_m2(ens, n_bins=16, m_max=32)
        order_bound = 32 ** 3 / (20_000 / 16)
        assert res.m2 <= order_bound
        assert res.m2 <= 5 * res.noise_floor_m2 + 1e-3

    def test_one_plus_cos_ratio(self):
        # density (1 + cos theta) / 2 pi: W_{+-1}/W_0 = 1/2, so P ratio 1/4
        rng = np.random.default_rng(19)
        n = 200_000
        theta = []
        while len(theta) < n:
            cand = rng.uniform(-np.pi, np.pi, 2 * n)
            keep = rng.uniform(0, 2, 2 * n) < 1 + np.cos(cand)
            theta.extend(cand[keep][: n - len(theta)])
        radius = np.sqrt(rng.exponential(0.5, n))
        pts = radius * np.exp(1j * np.asarray(theta))
        ens = ClassicalEnsemble(points=pts, n_traj=n, seed=19)
        res = classical_m2(ens, n_bins=16, m_max=16)
        ratio = res.spectrum.weight(1) / res.spectrum.weight(0)
        assert ratio == pytest.approx(0.25, abs=0.02)

    @given(phi=st.floats(0.0, 2 * np.pi))
    @settings(max_examples=10, deadline=None)
    def test_global_rotation_invariance(self, phi):
        ens = sample_initial(0.5, 20_000, seed=20)
        res = classical_m2(ens, n_bins=8, m_max=16)
        rotated = rotate(ens, phi)
        res_rot = classical_m2(rotated, n_bins=8, m_max=16)
        assert res_rot.m2 == pytest.approx(res.m2, rel=1e-9, abs=1e-12)

    def test_too_few_trajectories_rejected(self):
        ens = sample_initial(0.5, 100, seed=21)
        with pytest.raises(ValueError):
            classical_m2(ens, n_bins=64, m_max=8)

    def test_flag_on_wide_spectrum(self):
        # strongly kicked ensemble develops harmonics beyond a tiny m_max
        p = make_params(g0=1.5)
        ens = sample_initial(0.5, 50_000, seed=22)
        for _ in range(3):
            ens = classical_step(ens, p)
        res = classical_m2(ens, n_bins=32, m_max=16)
        assert res.flagged


class TestClassicalEcho:
    def test_identical_ensembles_give_unity(self):
        ens = sample_initial(0.5, 30_000, seed=23)
        assert histogram_fidelity(ens, ens) == pytest.approx(1.0, abs=1e-12)

    def test_unperturbed_echo_retraces(self):
        # roundoff is Lyapunov-amplified ~e^{Lambda T}; T = 3 keeps the
        # returned points at the 1e-9 level for g0 = 2
        p = make_params(g0=2.0)
        ens = sample_initial(1.0, 30_000, seed=24)
        final, fid = classical_echo(ens, p, T=3, xi=0.0)
        assert np.max(np.abs(final.points - ens.points)) < 1e-9
        assert fid == pytest.approx(1.0, abs=1e-6)

    def test_strong_perturbation_destroys_retrace(self):
        p = make_params(g0=2.0)
        ens = sample_initial(1.0, 30_000, seed=25)
        # xi far above the classical critical strength at this T
        _, fid_strong = classical_echo(ens, p, T=5, xi=1.0)
        _, fid_weak = classical_echo(ens, p, T=5, xi=1e-12)
        assert fid_weak > 0.99
        assert fid_strong < 0.5


class TestRoundoffIrreversibility:
    def test_chaotic_echo_amplifies_roundoff(self):
        # the full forward-then-backward echo at T = 50, g0 = 2 cannot
        # retrace in double precision: per-step rounding is stretched by
        # the positive Lyapunov exponent. This documents that behavior.
        p = make_params(g0=2.0)
        ens0 = sample_initial(1.5, 256, seed=26)
        ens = ens0
        for _ in range(50):
            ens = classical_step(ens, p)
        ens = rotate(ens, 0.0)
        for _ in range(50):
            ens = classical_step_inverse(ens, p)
        dev = np.max(np.abs(ens.points - ens0.points))
        assert dev > 1e-6   # far beyond arithmetic noise
