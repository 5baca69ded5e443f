"""Monte Carlo ensemble for the classical kicked oscillator.

One period of the map, in the complex phase-plane variable, is the free
nonlinear rotation alpha -> alpha e^{-i (omega0 + 2 |alpha|^2)} followed by
the kick alpha -> alpha + i g0. Both pieces are exact (delta kicks need no
integrator), so the inverse map is exact as well.

The harmonic estimator bins trajectories into equal-population radial
shells, takes per-shell angular moments, subtracts the 1/N_k shot-noise
bias, and clamps negatives. Its noise floor and spectral-tail diagnostics
ride along with the result so runners can widen m_max or trim fit windows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .harmonics import HarmonicSpectrum
from .params import ModelParams, make_rng


@dataclass(frozen=True)
class ClassicalEnsemble:
    """Trajectory set in the complex phase plane (alpha = sqrt(I) e^{-i theta})."""
    points: np.ndarray
    n_traj: int
    seed: int
    t: int = 0


@dataclass(frozen=True)
class ClassicalHarmonics:
    """Estimated harmonic weights plus shot-noise diagnostics."""
    spectrum: HarmonicSpectrum
    sigma_band: float         # per-band noise sd for an isotropic ensemble
    noise_floor_m2: float     # <m^2> the clamped estimator reports on noise
    tail_mass: float          # weight in the top decile of |m|
    flagged: bool             # tail mass above the noise-aware threshold

    @property
    def m2(self) -> float:
        return self.spectrum.m2


def sample_initial(delta_small: float, n_traj: int, seed: int
                   ) -> ClassicalEnsemble:
    """Isotropic complex Gaussian with <|alpha|^2> = delta_small."""
    if delta_small <= 0:
        raise ValueError("delta_small must be > 0 for a classical ensemble")
    rng = make_rng(seed)
    sigma = math.sqrt(delta_small / 2.0)
    pts = rng.normal(scale=sigma, size=n_traj) \
        + 1j * rng.normal(scale=sigma, size=n_traj)
    return ClassicalEnsemble(points=pts, n_traj=n_traj, seed=seed)


def classical_step(ens: ClassicalEnsemble, params: ModelParams
                   ) -> ClassicalEnsemble:
    a = ens.points
    rotated = a * np.exp(-1j * (params.omega0 + 2.0 * np.abs(a) ** 2))
    return replace(ens, points=rotated + 1j * params.g0, t=ens.t + 1)


def classical_step_inverse(ens: ClassicalEnsemble, params: ModelParams
                           ) -> ClassicalEnsemble:
    unkicked = ens.points - 1j * params.g0
    back = unkicked * np.exp(+1j * (params.omega0
                                    + 2.0 * np.abs(unkicked) ** 2))
    return replace(ens, points=back, t=ens.t - 1)


def rotate(ens: ClassicalEnsemble, xi: float) -> ClassicalEnsemble:
    """Phase-space rotation, the classical twin of the echo perturbation."""
    return replace(ens, points=ens.points * np.exp(-1j * xi))


def mean_action(ens: ClassicalEnsemble) -> float:
    return float(np.mean(np.abs(ens.points) ** 2))


def mean_action_series(ensembles) -> list[tuple[int, float]]:
    return [(ens.t, mean_action(ens)) for ens in ensembles]


def _equal_population_offsets(n: int, n_bins: int) -> np.ndarray:
    """Start offsets of n_bins contiguous chunks of a sorted array."""
    base, extra = divmod(n, n_bins)
    counts = np.full(n_bins, base)
    counts[:extra] += 1
    return np.concatenate(([0], np.cumsum(counts)[:-1]))


def classical_m2(ens: ClassicalEnsemble, n_bins: int = 64,
                 m_max: int = 512) -> ClassicalHarmonics:
    """Harmonic weights of the trajectory density.

    Radial shells are equal-population so every angular moment carries the
    same shot noise; the 1/N_k bias of |W_hat|^2 is subtracted and negative
    band estimates are clamped to zero.
    """
    n = ens.n_traj
    if n < 4 * n_bins:
        raise ValueError(f"{n} trajectories is too few for {n_bins} bins")
    order = np.argsort(np.abs(ens.points))
    pts = ens.points[order]
    offsets = _equal_population_offsets(n, n_bins)
    counts = np.diff(np.concatenate((offsets, [n]))).astype(float)
    w_bin = counts / n

    phase = np.exp(1j * np.angle(pts))
    running = np.ones(n, dtype=complex)
    numerators = np.empty(m_max + 1)
    numerators[0] = float(np.sum(w_bin * (1.0 - 1.0 / counts)))
    for m in range(1, m_max + 1):
        running = running * phase
        sums = np.add.reduceat(running, offsets)
        w_hat2 = (sums.real ** 2 + sums.imag ** 2) / counts ** 2
        numerators[m] = float(np.sum(w_bin * (w_hat2 - 1.0 / counts)))

    clamped = np.maximum(numerators, 0.0)
    total = clamped[0] + 2.0 * math.fsum(clamped[1:].tolist())
    weights = clamped / total
    m_arr = np.arange(1, m_max + 1, dtype=float)
    m2 = math.fsum((2.0 * weights[1:] * m_arr ** 2).tolist())

    # isotropic-ensemble noise model: per-band sd sqrt(n_bins)/n, the clamp
    # turns that into a positive mean of sigma/sqrt(2 pi) per band
    sigma_band = math.sqrt(n_bins) / n
    clamp_mean = sigma_band / math.sqrt(2.0 * math.pi)
    noise_floor = 2.0 * clamp_mean * float(np.sum(m_arr ** 2)) / total
    tail_start = int(math.ceil(0.9 * m_max))
    tail = 2.0 * float(np.sum(weights[tail_start:]))
    noise_tail = 2.0 * (m_max - tail_start + 1) * clamp_mean / total
    flagged = tail > 3.0 * noise_tail + 1e-4

    spec = HarmonicSpectrum(weights=weights, m2=m2, M=m_max,
                            tail_bound=tail, total_band_mass=total)
    return ClassicalHarmonics(spectrum=spec, sigma_band=sigma_band,
                              noise_floor_m2=noise_floor, tail_mass=tail,
                              flagged=flagged)


def histogram_fidelity(a: ClassicalEnsemble, ref: ClassicalEnsemble,
                       bins: int = 256) -> float:
    """Phase-space overlap of two ensembles via 2D histograms on a shared
    data-driven box: integral(W_a W_ref) / integral(W_ref^2)."""
    re = np.concatenate((a.points.real, ref.points.real))
    im = np.concatenate((a.points.imag, ref.points.imag))
    pad_r = 1e-9 + 0.01 * (re.max() - re.min())
    pad_i = 1e-9 + 0.01 * (im.max() - im.min())
    box = [[re.min() - pad_r, re.max() + pad_r],
           [im.min() - pad_i, im.max() + pad_i]]
    ha, _, _ = np.histogram2d(a.points.real, a.points.imag, bins=bins,
                              range=box)
    hr, _, _ = np.histogram2d(ref.points.real, ref.points.imag, bins=bins,
                              range=box)
    denom = float(np.sum(hr * hr))
    return float(np.sum(ha * hr)) / denom


def classical_echo(initial: ClassicalEnsemble, params: ModelParams,
                   T: int, xi: float) -> tuple[ClassicalEnsemble, float]:
    """Forward T periods, rotate by xi, backward T periods; returns the
    final ensemble and its histogram-overlap fidelity with the initial one."""
    ens = initial
    for _ in range(T):
        ens = classical_step(ens, params)
    ens = rotate(ens, xi)
    for _ in range(T):
        ens = classical_step_inverse(ens, params)
    return ens, histogram_fidelity(ens, initial)
