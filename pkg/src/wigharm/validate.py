"""Invariant suite: machine-checkable consistency across all modules.

Each check is a standalone function returning (ok, detail) so tests can run
them individually or with injected faults; ``run_validate`` executes the
registry and reports machine-readable pass/fail.
"""
from __future__ import annotations

import math

import numpy as np

from .classical import (classical_m2, classical_step, classical_step_inverse,
                        sample_initial)
from .echo import (EchoProtocol, fidelity_closed_form, peres_fidelity,
                   perturb, run_echo)
from .floquet import (build_floquet, displacement_matrix, step, step_inverse,
                      unitarity_defect, kick_guard_dim)
from .harmonics import harmonic_weights
from .params import InitialSpec, ModelParams, TruncationPolicy, make_rng
from .states import DensityState, build_initial, purity
from .wigner_oracle import m2_oracle


def _random_state(rng, dim: int, k: int = 2,
                  support: int | None = None) -> DensityState:
    support = support or dim
    w = rng.random(k)
    w /= w.sum()
    vecs = np.zeros((k, dim), dtype=complex)
    raw = rng.normal(size=(k, support)) + 1j * rng.normal(size=(k, support))
    vecs[:, :support] = raw / np.linalg.norm(raw, axis=1)[:, None]
    return DensityState.from_members(w, vecs)


def check_kick_unitarity(op=None) -> tuple[bool, str]:
    """Kick matrix unitary to 1e-10 on the kick-aware guarded block."""
    worst = 0.0
    ops = [op] if op is not None else []
    if not ops:
        for g0, hbar, dim in [(1.5, 1.0, 512), (2.0, 1.0, 1024),
                              (1.5, 0.1, 1536)]:
            p = ModelParams(omega0=1.0, hbar=hbar, g0=g0,
                            trunc=TruncationPolicy(dim=dim))
            ops.append(build_floquet(p))
    for o in ops:
        worst = max(worst, unitarity_defect(o))
    return worst <= 1e-10, f"max unitarity defect {worst:.3e}"


def check_kick_series() -> tuple[bool, str]:
    """Small-argument kick matches I + lam a^dag - lam* a to O(|lam|^2)."""
    dim = 32
    lam = 1e-4j
    d = displacement_matrix(lam, dim)
    n = np.arange(1, dim)
    a = np.diag(np.sqrt(n), 1).astype(complex)
    approx = np.eye(dim) + lam * a.T.conj() - np.conj(lam) * a
    err = float(np.max(np.abs(d - approx)))
    bound = 5.0 * abs(lam) ** 2 * dim
    return err <= bound, f"series defect {err:.3e} (bound {bound:.3e})"


def check_roundtrip() -> tuple[bool, str]:
    """step_inverse(step(s)) = s to 1e-12 for support inside the guard."""
    rng = make_rng(7)
    p = ModelParams(omega0=1.0, hbar=1.0, g0=0.8,
                    trunc=TruncationPolicy(dim=256, tail_tol=1e-6))
    op = build_floquet(p)
    guard = kick_guard_dim(op.lam, 256)
    st = _random_state(rng, 256, k=2, support=guard)
    rt = step_inverse(step(st, op), op)
    dev = float(np.max(np.abs(rt.vectors - st.vectors)))
    return dev <= 1e-12, f"roundtrip deviation {dev:.3e}"


def check_free_invariance() -> tuple[bool, str]:
    """g0 = 0 evolution leaves every harmonic weight unchanged."""
    rng = make_rng(8)
    p = ModelParams(omega0=1.3, hbar=0.7, g0=0.0,
                    trunc=TruncationPolicy(dim=64, tail_tol=1e-6))
    op = build_floquet(p)
    st = _random_state(rng, 64, k=3, support=48)
    ref = harmonic_weights(st)
    for _ in range(100):
        st = step(st, op)
    spec = harmonic_weights(st)
    top = max(ref.M, spec.M)
    dev = max(abs(spec.weight(m) - ref.weight(m)) for m in range(top + 1))
    dev = max(dev, abs(spec.m2 - ref.m2))
    return dev <= 1e-12, f"free-evolution drift {dev:.3e} over 100 periods"


def check_unitary_invariance() -> tuple[bool, str]:
    """Trace and purity invariant under random unitaries (dim <= 16)."""
    rng = make_rng(9)
    worst = 0.0
    for _ in range(5):
        dim = int(rng.integers(2, 17))
        st = _random_state(rng, dim, k=3)
        z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        q, _ = np.linalg.qr(z)
        rotated = DensityState(weights=st.weights, vectors=st.vectors @ q.T,
                               dim=dim)
        worst = max(worst, abs(purity(rotated) - purity(st)))
        worst = max(worst, abs(float(rotated.occupations().sum()) - 1.0))
    return worst <= 1e-10, f"purity/trace drift {worst:.3e}"


def check_rotation_invariance() -> tuple[bool, str]:
    """Phase-space rotations leave the harmonic spectrum unchanged."""
    rng = make_rng(10)
    worst = 0.0
    for _ in range(5):
        st = _random_state(rng, 24, k=2)
        ref = harmonic_weights(st)
        rot = perturb(st, float(rng.uniform(0, 2 * np.pi)))
        spec = harmonic_weights(rot)
        worst = max(worst, abs(spec.m2 - ref.m2) / max(ref.m2, 1e-6))
    return worst <= 1e-12, f"rotation drift {worst:.3e} (relative)"


def check_fidelity_identity() -> tuple[bool, str]:
    """Closed-form fidelity equals the trace form to 1e-10."""
    rng = make_rng(11)
    worst = 0.0
    for _ in range(20):
        dim = int(rng.integers(4, 65))
        st = _random_state(rng, dim, k=int(rng.integers(1, 4)))
        spec = harmonic_weights(st)
        for xi in rng.uniform(0.0, np.pi, size=5):
            f_closed = fidelity_closed_form(spec, float(xi))
            f_trace = peres_fidelity(perturb(st, float(xi)), st)
            worst = max(worst, abs(f_closed - f_trace))
    return worst <= 1e-10, f"identity gap {worst:.3e}"


def check_echo_trace_forms() -> tuple[bool, str]:
    """Both trace forms of the echo fidelity agree to 1e-10."""
    p = ModelParams(omega0=1.0, hbar=1.0, g0=1.2,
                    trunc=TruncationPolicy(dim=512, tail_tol=1e-9))
    st = build_initial(InitialSpec.from_delta_cap(0.5, 1.0), p)
    op = build_floquet(p)
    worst = 0.0
    for xi in (0.0, 0.3, 1.1):
        rec = run_echo(st, op, EchoProtocol(T=10, xi=xi))
        worst = max(worst, rec.trace_form_gap)
    return worst <= 1e-10, f"trace-form gap {worst:.3e}"


def check_oracle_equivalence(n_states: int = 20) -> tuple[bool, str]:
    """Analyzer m2 matches the grid oracle within 1e-6 relative."""
    rng = make_rng(12)
    worst = 0.0
    for _ in range(n_states):
        st = _random_state(rng, 17, k=int(rng.integers(1, 4)))
        hbar = float(rng.choice([0.5, 1.0, 2.0]))
        a = harmonic_weights(st).m2
        o = m2_oracle(st, hbar)
        worst = max(worst, abs(a - o) / o)
    return worst <= 1e-6, f"worst relative gap {worst:.3e}"


def check_classical_inverse() -> tuple[bool, str]:
    """Map inverse exact per trajectory: 50 step/unstep pairs at g0 = 2."""
    p = ModelParams(omega0=1.0, hbar=1.0, g0=2.0,
                    trunc=TruncationPolicy(dim=2))
    ens0 = sample_initial(1.5, 256, seed=123)
    ens = ens0
    for _ in range(50):
        ens = classical_step_inverse(classical_step(ens, p), p)
    dev = float(np.max(np.abs(ens.points - ens0.points)))
    return dev <= 1e-10, f"pairwise roundtrip deviation {dev:.3e} (T=50)"


def check_classical_isotropy() -> tuple[bool, str]:
    """Bias-subtracted estimator consistent with zero on isotropy."""
    ens = sample_initial(0.5, 20000, seed=321)
    res = classical_m2(ens, n_bins=16, m_max=32)
    # spec-level order bound plus the clamp-noise model at 5 sigma
    order_bound = 32.0 ** 3 / (20000 / 16)
    stat_bound = 5.0 * res.noise_floor_m2 + 1e-3
    ok = res.m2 <= min(order_bound, max(stat_bound, 1e-3))
    return ok, (f"isotropic m2 {res.m2:.3e} "
                f"(noise floor {res.noise_floor_m2:.3e})")


def check_classical_diffusion() -> tuple[bool, str]:
    """Mean action grows by ~g0^2 per kick in the chaotic regime."""
    from .experiments import linear_fit
    p = ModelParams(omega0=1.0, hbar=1.0, g0=1.5,
                    trunc=TruncationPolicy(dim=2))
    ens = sample_initial(0.5, 100_000, seed=99)
    series = [(0, float(np.mean(np.abs(ens.points) ** 2)))]
    for t in range(1, 21):
        ens = classical_step(ens, p)
        series.append((t, float(np.mean(np.abs(ens.points) ** 2))))
    slope, _, _ = linear_fit([t for t, _ in series], [a for _, a in series])
    rel = abs(slope - p.g0 ** 2) / p.g0 ** 2
    return rel <= 0.10, f"slope {slope:.4f} vs g0^2 {p.g0**2} ({rel:.1%})"


def check_initial_state() -> tuple[bool, str]:
    """Thermal construction: ground state at Delta=0, weights 2^-(n+1) at
    Delta=hbar, and identical states from either width convention."""
    p = ModelParams(omega0=1.0, hbar=1.0, g0=0.0,
                    trunc=TruncationPolicy(dim=64))
    ground = build_initial(InitialSpec.from_delta_cap(0.0, 1.0), p)
    if ground.n_members != 1 or abs(ground.vectors[0, 0] - 1.0) > 0:
        return False, "Delta=0 did not give the pure ground state"
    th = build_initial(InitialSpec.from_delta_cap(1.0, 1.0), p)
    expect = 0.5 ** (np.arange(th.n_members) + 1)
    dev = float(np.max(np.abs(th.weights - expect / expect.sum())))
    via_small = build_initial(InitialSpec.from_delta_small(1.5, 1.0), p)
    same = (th.n_members == via_small.n_members
            and np.array_equal(th.weights, via_small.weights))
    ok = dev <= 1e-12 and same
    return ok, f"thermal weight deviation {dev:.3e}, conventions match={same}"


CHECKS = [
    ("kick_unitarity", check_kick_unitarity),
    ("kick_series", check_kick_series),
    ("propagator_roundtrip", check_roundtrip),
    ("free_evolution_invariance", check_free_invariance),
    ("unitary_invariance", check_unitary_invariance),
    ("rotation_invariance", check_rotation_invariance),
    ("fidelity_identity", check_fidelity_identity),
    ("echo_trace_forms", check_echo_trace_forms),
    ("oracle_equivalence", check_oracle_equivalence),
    ("classical_inverse", check_classical_inverse),
    ("classical_isotropy", check_classical_isotropy),
    ("classical_diffusion", check_classical_diffusion),
    ("initial_state", check_initial_state),
]


def run_validate(cfg, out_dir: str, seed: int, threads: int = 1) -> dict:
    from .experiments import RunWriter
    writer = RunWriter("validate", cfg, out_dir, seed)
    results = []
    n_fail = 0
    for name, fn in CHECKS:
        if cfg.fast and name == "oracle_equivalence":
            ok, detail = fn(n_states=4)
        else:
            ok, detail = fn()
        results.append({"check": name, "ok": bool(ok), "detail": detail})
        if not ok:
            n_fail += 1
    writer.extra["checks"] = results
    writer.extra["n_failed"] = n_fail
    writer.csv("validate.csv", ["check", "ok", "detail"],
               [(r["check"], r["ok"], r["detail"]) for r in results])
    manifest = writer.finish()
    manifest["ok"] = n_fail == 0
    return manifest
