import json
import os

import numpy as np
import pytest

from wigharm.cli import main as cli_main
from wigharm.experiments import (ConfigError, GrowthConfig, departure_time,
                                 linear_fit, linear_window, load_config,
                                 manifest_hash, run_classical_growth,
                                 run_crossover_scan, run_echo_ladder,
                                 run_growth, run_integrable_inset)


def write_toml(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestConfig:
    def test_defaults(self):
        cfg = load_config("growth", None)
        assert cfg.g0 == 1.5
        assert cfg.hbar_list == (1.0, 0.1, 0.01)

    def test_file_overrides(self, tmp_path):
        path = write_toml(tmp_path, """
scenario = "growth"
[growth]
t_max = 4
hbar_list = [1.0]
classical_n_traj = 5000
""")
        cfg = load_config("growth", path)
        assert cfg.t_max == 4
        assert cfg.hbar_list == (1.0,)
        assert cfg.classical_n_traj == 5000

    def test_unknown_section_key_rejected(self, tmp_path):
        path = write_toml(tmp_path, "[growth]\nbogus = 1\n")
        with pytest.raises(ConfigError, match="bogus"):
            load_config("growth", path)

    def test_unknown_top_level_rejected(self, tmp_path):
        path = write_toml(tmp_path, "[mystery]\nx = 1\n")
        with pytest.raises(ConfigError, match="mystery"):
            load_config("growth", path)

    def test_scenario_mismatch_rejected(self, tmp_path):
        path = write_toml(tmp_path, 'scenario = "growth"\n')
        with pytest.raises(ConfigError, match="declares"):
            load_config("echo_ladder", path)

    def test_type_checked(self, tmp_path):
        path = write_toml(tmp_path, '[growth]\nt_max = "six"\n')
        with pytest.raises(ConfigError, match="integer"):
            load_config("growth", path)

    def test_unknown_scenario(self):
        with pytest.raises(ConfigError):
            load_config("quantum_supremacy", None)

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            load_config("growth", "/nonexistent/cfg.toml")


class TestFits:
    def test_linear_fit_exact_line(self):
        a, b, r2 = linear_fit([0, 1, 2, 3], [1.0, 3.0, 5.0, 7.0])
        assert a == pytest.approx(2.0)
        assert b == pytest.approx(1.0)
        assert r2 == pytest.approx(1.0)

    def test_linear_window_detects_break(self):
        ts = list(range(10))
        ys = [1.0 * t for t in ts[:6]] + [5.0 + 8.0 * (t - 5) ** 2
                                          for t in ts[6:]]
        end, r2 = linear_window(ts, ys, 0.98)
        assert 5 <= end <= 6

    def test_departure_time_interpolates(self):
        # classical fit: log m2 = 1.0 * t; quantum stalls at m2 = e
        rows = [(0, 0.0), (1, np.e), (2, np.e), (3, np.e)]
        t_dep = departure_time(1.0, 0.0, rows)
        assert t_dep is not None
        assert 1.0 < t_dep < 2.0

    def test_departure_none_when_tracking(self):
        rows = [(t, float(np.exp(t))) for t in range(5)]
        assert departure_time(1.0, 0.0, rows) is None


@pytest.fixture(scope="module")
def growth_run(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("growth"))
    cfg = GrowthConfig(hbar_list=(1.0,), t_max=3, classical_n_traj=20_000,
                       classical_m_max=256, dim_ceiling=512)
    manifest = run_growth(cfg, out, seed=7)
    return out, manifest


class TestGrowthRun:
    def test_files_written(self, growth_run):
        out, manifest = growth_run
        assert os.path.exists(os.path.join(out, "growth.csv"))
        assert os.path.exists(os.path.join(out, "growth_manifest.json"))
        assert manifest["csv_files"] == ["growth.csv"]

    def test_manifest_hash_in_csv_header(self, growth_run):
        out, manifest = growth_run
        first = open(os.path.join(out, "growth.csv")).readline().strip()
        assert first == f"# manifest: {manifest['manifest_hash']}"

    def test_header_contract(self, growth_run):
        out, _ = growth_run
        lines = open(os.path.join(out, "growth.csv")).read().splitlines()
        assert lines[1] == "series,hbar,t,m2"
        kinds = {ln.split(",")[0] for ln in lines[2:]}
        assert kinds == {"quantum", "classical"}

    def test_quantum_starts_isotropic(self, growth_run):
        out, _ = growth_run
        lines = open(os.path.join(out, "growth.csv")).read().splitlines()
        row0 = [ln for ln in lines[2:]
                if ln.startswith("quantum") and ln.split(",")[2] == "0"][0]
        assert float(row0.split(",")[3]) == 0.0


class TestDeterminism:
    def test_byte_identical_reruns(self, tmp_path):
        from wigharm.experiments import ClassicalGrowthConfig
        cfg = ClassicalGrowthConfig(t_max=4, n_traj=8000, m_max=64)
        out_a = str(tmp_path / "a")
        out_b = str(tmp_path / "b")
        run_classical_growth(cfg, out_a, seed=5)
        run_classical_growth(cfg, out_b, seed=5)
        csv_a = open(os.path.join(out_a, "classical_growth.csv")).read()
        csv_b = open(os.path.join(out_b, "classical_growth.csv")).read()
        assert csv_a == csv_b

    def test_hash_stable_under_dict_order(self):
        h1 = manifest_hash({"a": 1, "b": [1, 2]})
        h2 = manifest_hash({"b": [1, 2], "a": 1})
        assert h1 == h2


class TestScenarioSmoke:
    def test_echo_ladder_small(self, tmp_path):
        from wigharm.experiments import EchoLadderConfig
        cfg = EchoLadderConfig(T=6, l_min=0, l_max=2, delta_cap=0.5,
                               g0=1.2, tail_chi=26.0, dim_ceiling=2048)
        manifest = run_echo_ladder(cfg, str(tmp_path), seed=3)
        assert manifest["derived"]["worst_trace_form_gap"] <= 1e-10
        assert manifest["derived"]["xi_c"] > 0
        lines = open(tmp_path / "echo_summary.csv").read().splitlines()
        assert lines[1] == ("l,xi,xi_over_xic,fidelity,fidelity_at_reversal,"
                            "t_min,m2_min")
        # xi = 0 row retraces perfectly
        row = lines[2].split(",")
        assert row[0] == ""
        assert float(row[3]) == pytest.approx(1.0, abs=1e-10)

    def test_crossover_small(self, tmp_path):
        from wigharm.experiments import CrossoverConfig
        cfg = CrossoverConfig(hbar=1.0, t=2, g0_start=0.0, g0_stop=0.4,
                              g0_step=0.2, tail_chi=14.0, dim_ceiling=512)
        manifest = run_crossover_scan(cfg, str(tmp_path), seed=3)
        lines = open(tmp_path / "crossover.csv").read().splitlines()
        assert lines[1] == "g0,m2"
        first = lines[2].split(",")
        assert float(first[0]) == 0.0
        assert float(first[1]) == 0.0   # no kick, no harmonics

    def test_inset_small(self, tmp_path):
        from wigharm.experiments import InsetConfig
        cfg = InsetConfig(hbar_list=(1.0, 0.5), g0=0.8, t_max_cap=12,
                          dim_ceiling=1024)
        manifest = run_integrable_inset(cfg, str(tmp_path), seed=3)
        lines = open(tmp_path / "inset.csv").read().splitlines()
        assert lines[1] == "hbar,t,sqrt_m2"
        assert "windows" in manifest["derived"]

    def test_growth_flat_without_kick(self, tmp_path):
        cfg = GrowthConfig(hbar_list=(1.0,), t_max=3, g0=0.0,
                           classical_n_traj=20_000, classical_m_max=64,
                           dim_ceiling=256)
        manifest = run_growth(cfg, str(tmp_path), seed=11)
        lines = open(tmp_path / "growth.csv").read().splitlines()
        quantum = [float(ln.split(",")[3]) for ln in lines[2:]
                   if ln.startswith("quantum")]
        assert all(v == 0.0 for v in quantum)
        classical = [float(ln.split(",")[3]) for ln in lines[2:]
                     if ln.startswith("classical")]
        floors = manifest["derived"]["classical_noise_floor"]
        cap = 5.0 * max(floors.values())
        assert all(v <= cap for v in classical)   # clamp noise only


class TestCli:
    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[growth]\nbogus = 1\n")
        code = cli_main(["growth", "--config", str(bad),
                         "--out", str(tmp_path / "out")])
        assert code == 2

    def test_ceiling_exit_code(self, tmp_path):
        cfg = tmp_path / "ceil.toml"
        cfg.write_text("""
[crossover_scan]
hbar = 0.01
t = 3
g0_start = 1.5
g0_stop = 1.5
g0_step = 0.1
dim_ceiling = 64
""")
        code = cli_main(["crossover_scan", "--config", str(cfg),
                         "--out", str(tmp_path / "out")])
        assert code == 3

    def test_validate_fast_runs_green(self, tmp_path):
        cfg = tmp_path / "v.toml"
        cfg.write_text("[validate]\nfast = true\n")
        code = cli_main(["validate", "--config", str(cfg),
                         "--out", str(tmp_path / "out"), "--seed", "1"])
        assert code == 0
        report = json.load(open(tmp_path / "out" / "validate_manifest.json"))
        assert report["derived"]["n_failed"] == 0

    def test_unknown_scenario_rejected(self):
        with pytest.raises(SystemExit):
            cli_main(["teleportation"])
