"""Config-driven scenario runners: harmonic growth, echo ladder, crossover
scan, integrable inset, classical growth, and the invariant suite.

Configs are TOML (key-value with sections), strictly validated: unknown keys
are rejected. Every run writes CSV files whose first line carries the
manifest hash, then a JSON manifest (atomically, last). Identical config and
seed give byte-identical CSVs; wall time lives only in the manifest and is
excluded from the hash.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .classical import (ClassicalEnsemble, classical_m2, classical_step,
                        mean_action, sample_initial)
from .echo import (EchoProtocol, critical_strength, peres_fidelity, perturb,
                   run_echo)
from .floquet import apply_free, build_floquet, step
from .harmonics import harmonic_weights, spectrum_rows
from .params import InitialSpec, ModelParams, TruncationError, TruncationPolicy
from .states import build_initial, thermal_weights


class ConfigError(ValueError):
    """Bad configuration file or values; CLI exit code 2."""


class CeilingError(RuntimeError):
    """Truncation needs exceeded the configured dim ceiling; exit code 3."""


class InvariantFailure(RuntimeError):
    """A run-level consistency check failed; exit code 1."""


# ---------------------------------------------------------------------------
# scenario configs

@dataclass
class GrowthConfig:
    omega0: float = 1.0
    g0: float = 1.5
    delta_small: float = 0.5
    hbar_list: tuple = (1.0, 0.1, 0.01)
    t_max: int = 8
    tail_tol: float = 5e-3
    tail_chi: float = 7.0
    dim_ceiling: int = 8192
    classical_n_traj: int = 1_000_000
    classical_n_bins: int = 64
    classical_m_max: int = 4096
    observe: str = "after_kick"
    dump_spectra: bool = False


@dataclass
class EchoLadderConfig:
    omega0: float = 1.0
    hbar: float = 1.0
    g0: float = 2.0
    delta_cap: float = 1.0
    T: int = 50
    l_min: int = -6
    l_max: int = 8
    record_every: int = 1
    include_xi_zero: bool = True
    tail_tol: float = 1e-8
    tail_chi: float = 24.0
    dim_ceiling: int = 8192


@dataclass
class CrossoverConfig:
    omega0: float = 1.0
    hbar: float = 0.01
    delta_cap: float = 0.0
    t: int = 3
    g0_start: float = 0.0
    g0_stop: float = 1.5
    g0_step: float = 0.05
    tail_tol: float = 1e-6
    tail_chi: float = 10.0
    dim_ceiling: int = 8192


@dataclass
class InsetConfig:
    omega0: float = 1.0
    g0: float = 1.0
    delta_small: float = 0.5
    hbar_list: tuple = (1.0, 0.1, 0.05, 0.02, 0.01, 0.005)
    t_max_cap: int = 240
    window_margin: float = 1.35
    r2_min: float = 0.98
    record_every: int = 1
    tail_tol: float = 5e-3
    tail_chi: float = 5.5
    dim_ceiling: int = 8192
    observe: str = "after_kick"


@dataclass
class ClassicalGrowthConfig:
    omega0: float = 1.0
    g0: float = 1.5
    delta_small: float = 0.5
    t_max: int = 30
    n_traj: int = 100_000
    n_bins: int = 64
    m_max: int = 4096


@dataclass
class ValidateConfig:
    oracle_states: int = 20
    fast: bool = False


_SCENARIOS = {
    "growth": GrowthConfig,
    "echo_ladder": EchoLadderConfig,
    "crossover_scan": CrossoverConfig,
    "integrable_inset": InsetConfig,
    "classical_growth": ClassicalGrowthConfig,
    "validate": ValidateConfig,
}

_SECTION_FOR = {
    "growth": "growth",
    "echo_ladder": "echo_ladder",
    "crossover_scan": "crossover_scan",
    "integrable_inset": "integrable_inset",
    "classical_growth": "classical_growth",
    "validate": "validate",
}


def scenario_names() -> list[str]:
    return list(_SCENARIOS)


def load_config(scenario: str, path: str | None):
    """Build the scenario config from defaults plus an optional TOML file.

    The file may carry a top-level ``scenario`` key (must match) and one
    section named after the scenario; anything else is rejected.
    """
    if scenario not in _SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; "
                          f"expected one of {sorted(_SCENARIOS)}")
    cls = _SCENARIOS[scenario]
    if path is None:
        return cls()
    try:
        import tomli
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except Exception as exc:  # tomli decode errors
        raise ConfigError(f"cannot parse {path}: {exc}")

    declared = raw.pop("scenario", scenario)
    if declared != scenario:
        raise ConfigError(
            f"config declares scenario {declared!r} but {scenario!r} "
            "was requested")
    section = raw.pop(_SECTION_FOR[scenario], {})
    if raw:
        raise ConfigError(f"unknown top-level keys: {sorted(raw)}")
    if not isinstance(section, dict):
        raise ConfigError("scenario section must be a table")

    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in section.items():
        if key not in fields:
            raise ConfigError(
                f"unknown key {key!r} in [{_SECTION_FOR[scenario]}]; "
                f"allowed: {sorted(fields)}")
        default = getattr(cls(), key)
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{key} must be a boolean")
        elif isinstance(default, int) and not isinstance(value, bool):
            if not isinstance(value, int):
                raise ConfigError(f"{key} must be an integer")
        elif isinstance(default, float):
            if not isinstance(value, (int, float)):
                raise ConfigError(f"{key} must be a number")
            value = float(value)
        elif isinstance(default, tuple):
            if not isinstance(value, list):
                raise ConfigError(f"{key} must be a list")
            value = tuple(value)
        elif isinstance(default, str):
            if not isinstance(value, str):
                raise ConfigError(f"{key} must be a string")
        kwargs[key] = value
    cfg = cls(**kwargs)
    _check_config(scenario, cfg)
    return cfg


def _check_config(scenario: str, cfg) -> None:
    positive = {"t_max": getattr(cfg, "t_max", 1),
                "dim_ceiling": getattr(cfg, "dim_ceiling", 2)}
    for name, value in positive.items():
        if value < 1:
            raise ConfigError(f"{name} must be >= 1, got {value}")
    if getattr(cfg, "observe", "after_kick") not in ("after_kick",
                                                     "before_kick"):
        raise ConfigError("observe must be 'after_kick' or 'before_kick'")
    if scenario == "echo_ladder" and cfg.l_min > cfg.l_max:
        raise ConfigError("l_min must be <= l_max")


# ---------------------------------------------------------------------------
# manifests and CSV output

def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def manifest_hash(core: dict) -> str:
    return hashlib.sha256(_canonical(core).encode()).hexdigest()[:16]


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)      # shortest round-trip decimal
    if value is None:
        return ""
    return str(value)


def write_csv(path: str, header: list[str], rows, run_hash: str) -> None:
    lines = [f"# manifest: {run_hash}", ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


class RunWriter:
    """Collects outputs of one scenario run and lands them on disk."""

    def __init__(self, scenario: str, cfg, out_dir: str, seed: int):
        self.scenario = scenario
        self.out_dir = out_dir
        self.core = {
            "scenario": scenario,
            "config": dataclasses.asdict(cfg),
            "seed": seed,
            "code_version": __version__,
        }
        self.hash = manifest_hash(self.core)
        self.extra: dict = {}
        self.files: list[str] = []
        self.t0 = time.time()
        os.makedirs(out_dir, exist_ok=True)

    def csv(self, name: str, header: list[str], rows) -> str:
        path = os.path.join(self.out_dir, name)
        write_csv(path, header, rows, self.hash)
        self.files.append(name)
        return path

    def finish(self) -> dict:
        manifest = dict(self.core)
        manifest["manifest_hash"] = self.hash
        manifest["derived"] = self.extra
        manifest["csv_files"] = self.files
        manifest["wall_time_s"] = round(time.time() - self.t0, 3)
        path = os.path.join(self.out_dir, f"{self.scenario}_manifest.json")
        _atomic_write(path, json.dumps(manifest, indent=2, sort_keys=True)
                      + "\n")
        return manifest


# ---------------------------------------------------------------------------
# fits and shared evolution helpers

def linear_fit(x, y) -> tuple[float, float, float]:
    """Least squares y ~ a x + b; returns (a, b, r2)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    a, b = np.polyfit(x, y, 1)
    resid = y - (a * x + b)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(a), float(b), r2


def linear_window(ts, ys, r2_min: float) -> tuple[int, float]:
    """Largest prefix length L >= 3 with fit R^2 >= r2_min; returns
    (window end time, r2 at that window). Zero if no 3-point fit passes."""
    best_t, best_r2 = 0, 0.0
    for length in range(3, len(ts) + 1):
        _, _, r2 = linear_fit(ts[:length], ys[:length])
        if r2 >= r2_min:
            best_t, best_r2 = ts[length - 1], r2
        else:
            break
    return best_t, best_r2


def thermal_member_count(delta_cap: float, hbar: float) -> int:
    return thermal_weights(delta_cap / hbar)[0].size


def diffusive_dim(delta_small: float, hbar: float, g0: float, t: int,
                  chi: float, members: int) -> int:
    """Box size for a run whose action tail is exponential with scale
    delta + g0^2 t: chi e-foldings of that scale, plus the initial members."""
    scale = (delta_small + g0 * g0 * t) / hbar
    return int(math.ceil(chi * scale)) + members + 64


def max_t_within_ceiling(delta_small: float, hbar: float, g0: float,
                         t_max: int, chi: float, members: int,
                         ceiling: int) -> int:
    t = t_max
    while t > 1 and diffusive_dim(delta_small, hbar, g0, t, chi,
                                  members) > ceiling:
        t -= 1
    return t


def evolve_recorded(state, op, t_max: int, *, observe: str = "after_kick",
                    record_every: int = 1):
    """Yield (t, state-to-observe) for t = 0..t_max.

    ``before_kick`` samples after the free rotation only; the kick then
    completes the period before the next step.
    """
    yield 0, state
    for t in range(1, t_max + 1):
        if observe == "before_kick":
            rotated = apply_free(state, op)
            from .floquet import apply_kick
            state = apply_kick(rotated, op)
            probe = rotated
        else:
            state = step(state, op)
            probe = state
        if t % record_every == 0 or t == t_max:
            yield t, probe


def _with_escalation(run_point, dim0: int, ceiling: int):
    """Run ``run_point(dim)``, doubling dim on truncation failures."""
    dim = min(dim0, ceiling)
    escalations = 0
    while True:
        try:
            return run_point(dim), dim, escalations
        except TruncationError as exc:
            if dim >= ceiling:
                raise CeilingError(
                    f"dim ceiling {ceiling} insufficient: {exc}") from exc
            dim = min(2 * dim, ceiling)
            escalations += 1


# ---------------------------------------------------------------------------
# classical growth with adaptive harmonic range

def classical_m2_adaptive(ens: ClassicalEnsemble, n_bins: int,
                          m_max_ceiling: int, m_start: int = 16):
    """Estimate harmonics, doubling m_max while the tail flags or the
    spectrum is too wide for the range; returns (result, m_max_used)."""
    m_max = m_start
    while True:
        res = classical_m2(ens, n_bins=n_bins, m_max=m_max)
        wide = math.sqrt(max(res.m2, 0.0)) > m_max / 6.0
        if (res.flagged or wide) and m_max < m_max_ceiling:
            m_max *= 2
            continue
        return res, m_max


def classical_growth_curve(delta_small: float, params_like: dict,
                           n_traj: int, n_bins: int, m_max_ceiling: int,
                           t_max: int, seed: int):
    """(t, m2, noise_floor, m_max, flagged, mean_action) rows for the
    classical ensemble under the kicked map."""
    p = ModelParams(omega0=params_like["omega0"], hbar=1.0,
                    g0=params_like["g0"],
                    trunc=TruncationPolicy(dim=2, tail_tol=1.0))
    ens = sample_initial(delta_small, n_traj, seed)
    rows = []
    for t in range(t_max + 1):
        if t:
            ens = classical_step(ens, p)
        res, used = classical_m2_adaptive(ens, n_bins, m_max_ceiling)
        rows.append((t, res.m2, res.noise_floor_m2, used, res.flagged,
                     mean_action(ens)))
    return rows


def classical_fit_window(rows, snr_min: float = 30.0) -> list[int]:
    """Times where the estimate is signal-dominated and inside range:
    m2 at least snr_min times the clamp noise floor and sqrt(m2) well
    below the harmonic ceiling used."""
    usable = []
    for t, m2, floor, m_max, flagged, _ in rows:
        if t == 0 or m2 <= 0:
            continue
        if m2 >= snr_min * floor and math.sqrt(m2) <= m_max / 6.0 \
                and not flagged:
            usable.append(t)
    return usable


def departure_time(fit_a: float, fit_b: float, quantum_rows,
                   ratio: float = 2.0) -> float | None:
    """First (interpolated) time the fitted classical curve exceeds the
    quantum one by ``ratio``; the curves coincide at t = 0 by construction."""
    log_r_prev, t_prev = 0.0, 0.0
    target = math.log(ratio)
    for t, m2_q in quantum_rows:
        if t == 0 or m2_q <= 0:
            continue
        log_r = (fit_a * t + fit_b) - math.log(m2_q)
        if log_r >= target and log_r > log_r_prev:
            frac = (target - log_r_prev) / (log_r - log_r_prev)
            return t_prev + frac * (t - t_prev)
        log_r_prev, t_prev = log_r, t
    return None


# ---------------------------------------------------------------------------
# scenario runners

def run_growth(cfg: GrowthConfig, out_dir: str, seed: int,
               threads: int = 1) -> dict:
    writer = RunWriter("growth", cfg, out_dir, seed)
    rows = []
    spectra = []
    per_hbar = {}

    def quantum_curve(hbar: float):
        members = thermal_member_count(max(cfg.delta_small - hbar / 2, 0.0),
                                       hbar)
        t_eff = max_t_within_ceiling(cfg.delta_small, hbar, cfg.g0,
                                     cfg.t_max, cfg.tail_chi, members,
                                     cfg.dim_ceiling)
        dim0 = diffusive_dim(cfg.delta_small, hbar, cfg.g0, t_eff,
                             cfg.tail_chi, members)

        def point(dim):
            trunc = TruncationPolicy(dim=dim, tail_tol=cfg.tail_tol)
            p = ModelParams(omega0=cfg.omega0, hbar=hbar, g0=cfg.g0,
                            trunc=trunc)
            state = build_initial(
                InitialSpec.from_delta_small(cfg.delta_small, hbar), p)
            op = build_floquet(p)
            out = []
            specs = []
            for t, probe in evolve_recorded(state, op, t_eff,
                                            observe=cfg.observe):
                spec = harmonic_weights(probe)
                out.append((t, spec.m2))
                if cfg.dump_spectra:
                    specs.append((t, spec))
            return out, specs, state.discarded_weight

        (curve, specs, discarded), dim, esc = _with_escalation(
            point, dim0, cfg.dim_ceiling)
        return hbar, t_eff, dim, esc, discarded, curve, specs

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(quantum_curve, cfg.hbar_list))
    else:
        results = [quantum_curve(h) for h in cfg.hbar_list]

    for hbar, t_eff, dim, esc, discarded, curve, specs in results:
        per_hbar[str(hbar)] = {"t_max": t_eff, "dim": dim,
                               "escalations": esc,
                               "discarded_weight": discarded}
        for t, m2 in curve:
            rows.append(("quantum", hbar, t, m2))
        for t, spec in specs:
            spectra.extend((hbar, t, m, p) for t_, m, p
                           in spectrum_rows(t, spec))

    cl_rows = classical_growth_curve(
        cfg.delta_small, {"omega0": cfg.omega0, "g0": cfg.g0},
        cfg.classical_n_traj, cfg.classical_n_bins, cfg.classical_m_max,
        cfg.t_max, seed)
    for t, m2, floor, m_max, flagged, _ in cl_rows:
        rows.append(("classical", None, t, m2))

    usable = classical_fit_window(cl_rows)
    derived = {"per_hbar": per_hbar,
               "classical_fit_window": usable,
               "classical_noise_floor": {
                   str(r[0]): r[2] for r in cl_rows}}
    if len(usable) >= 2:
        pts = {r[0]: r[1] for r in cl_rows}
        a, b, r2 = linear_fit(usable, [math.log(pts[t]) for t in usable])
        derived["classical_fit"] = {"slope": a, "intercept": b, "r2": r2}
        for hbar, t_eff, dim, esc, disc, curve, _ in results:
            t_dep = departure_time(a, b, curve)
            per_hbar[str(hbar)]["t_departure"] = t_dep
    writer.extra.update(derived)

    writer.csv("growth.csv", ["series", "hbar", "t", "m2"], rows)
    if cfg.dump_spectra:
        writer.csv("growth_spectra.csv", ["hbar", "t", "m", "P_m"], spectra)
    return writer.finish()


def run_echo_ladder(cfg: EchoLadderConfig, out_dir: str, seed: int,
                    threads: int = 1) -> dict:
    writer = RunWriter("echo_ladder", cfg, out_dir, seed)
    members = thermal_member_count(cfg.delta_cap, cfg.hbar)
    delta_small = cfg.delta_cap + cfg.hbar / 2
    dim0 = diffusive_dim(delta_small, cfg.hbar, cfg.g0, cfg.T,
                         cfg.tail_chi, members)

    def forward(dim):
        trunc = TruncationPolicy(dim=dim, tail_tol=cfg.tail_tol)
        p = ModelParams(omega0=cfg.omega0, hbar=cfg.hbar, g0=cfg.g0,
                        trunc=trunc)
        initial = build_initial(
            InitialSpec.from_delta_cap(cfg.delta_cap, cfg.hbar), p)
        op = build_floquet(p)
        fwd = []
        state = initial
        for t, probe in evolve_recorded(state, op, cfg.T,
                                        record_every=cfg.record_every):
            fwd.append((t, harmonic_weights(probe).m2))
            state = probe
        return initial, op, state, fwd

    (initial, op, at_T, fwd), dim, esc = _with_escalation(
        forward, dim0, cfg.dim_ceiling)
    m2_T = fwd[-1][1]
    xi_c = critical_strength(m2_T)
    ladder = [("inf", 0.0)] if cfg.include_xi_zero else []
    ladder += [(l, xi_c * math.exp(-l / 2.0))
               for l in range(cfg.l_max, cfg.l_min - 1, -1)]

    curve_rows = [(None, None, "forward", t, m2) for t, m2 in fwd]
    summary_rows = []
    worst_gap = 0.0
    for label, xi in ladder:
        perturbed = perturb(at_T, xi)
        fid_reversal = peres_fidelity(perturbed, at_T)
        back = [(cfg.T, harmonic_weights(perturbed).m2)]
        state = perturbed
        from .floquet import step_inverse
        for k in range(1, cfg.T + 1):
            state = step_inverse(state, op)
            if k % cfg.record_every == 0 or k == cfg.T:
                back.append((cfg.T + k, harmonic_weights(state).m2))
        fid = peres_fidelity(state, initial)
        gap = abs(fid - fid_reversal)
        worst_gap = max(worst_gap, gap)
        t_min, m2_min = min(back, key=lambda r: r[1])
        l_out = None if label == "inf" else label
        curve_rows += [(l_out, xi, "backward", t, m2) for t, m2 in back]
        summary_rows.append((l_out, xi, xi / xi_c if xi_c > 0 else 0.0,
                             fid, fid_reversal, t_min, m2_min))

    writer.extra.update({
        "dim": dim, "escalations": esc, "m2_at_T": m2_T, "xi_c": xi_c,
        "worst_trace_form_gap": worst_gap,
        "discarded_weight": initial.discarded_weight,
    })
    if worst_gap > 1e-10:
        writer.extra["trace_form_violation"] = True
    writer.csv("echo_curves.csv", ["l", "xi", "leg", "t", "m2"], curve_rows)
    writer.csv("echo_summary.csv",
               ["l", "xi", "xi_over_xic", "fidelity", "fidelity_at_reversal",
                "t_min", "m2_min"], summary_rows)
    manifest = writer.finish()
    if worst_gap > 1e-10:
        raise InvariantFailure(
            f"echo trace forms disagree by {worst_gap:.3e} (> 1e-10)")
    return manifest


def run_crossover_scan(cfg: CrossoverConfig, out_dir: str, seed: int,
                       threads: int = 1) -> dict:
    writer = RunWriter("crossover_scan", cfg, out_dir, seed)
    n_pts = int(round((cfg.g0_stop - cfg.g0_start) / cfg.g0_step)) + 1
    g0_values = [round(cfg.g0_start + i * cfg.g0_step, 10)
                 for i in range(n_pts)]
    members = thermal_member_count(cfg.delta_cap, cfg.hbar)

    def scan_point(g0: float):
        def point(dim):
            trunc = TruncationPolicy(dim=dim, tail_tol=cfg.tail_tol)
            p = ModelParams(omega0=cfg.omega0, hbar=cfg.hbar, g0=g0,
                            trunc=trunc)
            state = build_initial(
                InitialSpec.from_delta_cap(cfg.delta_cap, cfg.hbar), p)
            op = build_floquet(p)
            for _ in range(cfg.t):
                state = step(state, op)
            return harmonic_weights(state).m2

        delta_small = cfg.delta_cap + cfg.hbar / 2
        dim0 = diffusive_dim(delta_small, cfg.hbar, g0, cfg.t,
                             cfg.tail_chi, members)
        m2, dim, esc = _with_escalation(point, dim0, cfg.dim_ceiling)
        return g0, m2, dim, esc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(scan_point, g0_values))
    else:
        results = [scan_point(g) for g in g0_values]

    rows = [(g0, m2) for g0, m2, _, _ in results]
    writer.csv("crossover.csv", ["g0", "m2"], rows)

    # steepest relative rise between adjacent scan points, left edge >= 0.2
    best = None
    for (ga, ma), (gb, mb) in zip(rows, rows[1:]):
        if ga < 0.2 or ma <= 0 or mb <= 0:
            continue
        rise = math.log(mb / ma)
        if best is None or rise > best[0]:
            best = (rise, 0.5 * (ga + gb))
    writer.extra["dims"] = {str(g): d for g, _, d, _ in results}
    if best is not None:
        writer.extra["steepest_rise_mid_g0"] = best[1]
        writer.extra["steepest_rise_log"] = best[0]
    lookup = dict(rows)
    if lookup.get(0.3) and lookup.get(1.5):
        writer.extra["m2_ratio_1p5_over_0p3"] = lookup[1.5] / lookup[0.3]
    return writer.finish()


def run_integrable_inset(cfg: InsetConfig, out_dir: str, seed: int,
                         threads: int = 1) -> dict:
    writer = RunWriter("integrable_inset", cfg, out_dir, seed)
    rows = []
    windows = {}
    prev_window = 0

    hbars = sorted(cfg.hbar_list, reverse=True)   # largest first
    for hbar in hbars:
        members = thermal_member_count(max(cfg.delta_small - hbar / 2, 0.0),
                                       hbar)
        # run long enough to beat the previous window (a run that stays
        # linear to its end is censored: the true window is at least t_max)
        t_needed = max(24, int(math.ceil(cfg.window_margin * prev_window))
                       + 3)
        t_eff = min(cfg.t_max_cap,
                    max_t_within_ceiling(cfg.delta_small, hbar, cfg.g0,
                                         t_needed, cfg.tail_chi, members,
                                         cfg.dim_ceiling))
        dim0 = diffusive_dim(cfg.delta_small, hbar, cfg.g0, t_eff,
                             cfg.tail_chi, members)

        def point(dim, hbar=hbar, t_eff=t_eff):
            trunc = TruncationPolicy(dim=dim, tail_tol=cfg.tail_tol)
            p = ModelParams(omega0=cfg.omega0, hbar=hbar, g0=cfg.g0,
                            trunc=trunc)
            state = build_initial(
                InitialSpec.from_delta_small(cfg.delta_small, hbar), p)
            op = build_floquet(p)
            out = []
            for t, probe in evolve_recorded(state, op, t_eff,
                                            observe=cfg.observe,
                                            record_every=cfg.record_every):
                out.append((t, math.sqrt(harmonic_weights(probe).m2)))
            return out

        curve, dim, esc = _with_escalation(point, dim0, cfg.dim_ceiling)
        ts = [t for t, _ in curve]
        sq = [v for _, v in curve]
        w_end, r2 = linear_window(ts, sq, cfg.r2_min)
        censored = w_end >= ts[-1]
        windows[str(hbar)] = {"window_end": w_end, "r2": r2,
                              "t_max": ts[-1], "censored": censored,
                              "dim": dim, "escalations": esc}
        prev_window = max(prev_window, w_end)
        rows.extend((hbar, t, v) for t, v in curve)

    order = [windows[str(h)]["window_end"] for h in hbars]
    writer.extra["windows"] = windows
    writer.extra["window_order"] = order
    writer.extra["monotone_in_hbar"] = all(a < b for a, b
                                           in zip(order, order[1:]))
    writer.csv("inset.csv", ["hbar", "t", "sqrt_m2"], rows)
    return writer.finish()


def run_classical_growth(cfg: ClassicalGrowthConfig, out_dir: str,
                         seed: int, threads: int = 1) -> dict:
    writer = RunWriter("classical_growth", cfg, out_dir, seed)
    rows = classical_growth_curve(
        cfg.delta_small, {"omega0": cfg.omega0, "g0": cfg.g0},
        cfg.n_traj, cfg.n_bins, cfg.m_max, cfg.t_max, seed)
    csv_rows = [(t, m2, act, cfg.n_traj, seed)
                for t, m2, _, _, _, act in rows]
    writer.csv("classical_growth.csv",
               ["t", "m2_classical", "mean_action", "n_traj", "seed"],
               csv_rows)
    acts = [(t, act) for t, _, _, _, _, act in rows]
    slope, intercept, r2 = linear_fit([t for t, _ in acts],
                                      [a for _, a in acts])
    writer.extra["mean_action_fit"] = {
        "slope": slope, "intercept": intercept, "r2": r2,
        "g0_squared": cfg.g0 ** 2,
    }
    usable = classical_fit_window(rows)
    if len(usable) >= 2:
        pts = {r[0]: r[1] for r in rows}
        a, b, fr2 = linear_fit(usable, [math.log(pts[t]) for t in usable])
        writer.extra["m2_fit"] = {"slope": a, "intercept": b, "r2": fr2,
                                  "window": usable}
    return writer.finish()
