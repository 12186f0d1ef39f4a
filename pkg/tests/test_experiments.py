"""Config parsing, deployment templating, and the Monte-Carlo runner."""

import csv
import io
from pathlib import Path

import numpy as np
import pytest

from irs_swipt.experiments import (ExperimentConfig, MAIN_COLUMNS, TIMING_COLUMNS,
                                   apply_sweep, build_problem, build_scenario,
                                   config_from_mapping, load_config, place_users,
                                   power_dbm, run_experiment, timing_path_for,
                                   _panel_grid)


def tiny_config(**overrides):
    base = dict(M=2, L=1, N0=2, K_I=1, K_E=1, gamma0_db=10.0, E0=1e-8,
                sweep_values=(8.0,), solvers=("no_irs",), n_seeds=1, base_seed=3)
    base.update(overrides)
    return ExperimentConfig(**base)


class TestConfigParsing:
    def test_empty_mapping_gives_defaults(self):
        cfg = config_from_mapping({})
        assert cfg.M == 4 and cfg.L == 2 and cfg.N0 == 8
        assert cfg.sweep_variable == "d_y1" and cfg.solvers == ("penalty",)

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError):
            config_from_mapping({"n_antennas": 4})

    def test_sweep_block(self):
        cfg = config_from_mapping(
            {"sweep": {"variable": "K_E", "values": [2, 4, 8]}})
        assert cfg.sweep_variable == "K_E"
        assert cfg.sweep_values == (2, 4, 8)

    def test_sweep_keys_only_via_block(self):
        with pytest.raises(ValueError):
            config_from_mapping({"sweep_variable": "K_E"})
        with pytest.raises(ValueError):
            config_from_mapping({"sweep": {"variable": "K_E", "points": [1]}})

    def test_bad_values_rejected(self):
        for bad in (dict(solvers=("gradient",)), dict(sweep_variable="M"),
                    dict(L=3), dict(K_I=0, K_E=0), dict(n_seeds=0),
                    dict(E0=0.0), dict(ap_irs_fading="los,rayleigh,los"),
                    dict(ap_irs_fading="blotchy")):
            with pytest.raises(ValueError):
                ExperimentConfig(**bad)

    def test_per_panel_fading_accepted(self):
        cfg = ExperimentConfig(ap_irs_fading="los, rayleigh")
        assert cfg.fading_modes() == ("los", "rayleigh")

    def test_yaml_roundtrip(self, tmp_path):
        path = tmp_path / "exp.yaml"
        path.write_text("M: 6\nsweep:\n  variable: N0\n  values: [4, 8]\n"
                        "solvers: [penalty, no_irs]\n")
        cfg = load_config(path)
        assert cfg.M == 6 and cfg.sweep_variable == "N0"
        assert cfg.solvers == ("penalty", "no_irs")

    def test_empty_yaml_is_defaults(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        assert load_config(path).M == 4

    def test_yaml_root_must_be_mapping(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ValueError):
            load_config(path)

    def test_experiment_id_stable(self):
        a, b = ExperimentConfig(), ExperimentConfig()
        c = ExperimentConfig(M=5)
        assert a.experiment_id() == b.experiment_id()
        assert a.experiment_id() != c.experiment_id()
        assert len(a.experiment_id()) == 10


class TestSweepAndGrid:
    def test_float_sweep_cast(self):
        cfg = ExperimentConfig(sweep_variable="d_y1")
        assert apply_sweep(cfg, "12").d_y1 == 12.0
        assert cfg.d_y1 == 8.0  # original untouched

    def test_int_sweep_cast(self):
        cfg = ExperimentConfig(sweep_variable="K_E")
        point = apply_sweep(cfg, 4.0)
        assert point.K_E == 4 and isinstance(point.K_E, int)

    def test_panel_grid_divisor_rule(self):
        assert _panel_grid(8, None) == (4, 2)
        assert _panel_grid(9, None) == (3, 3)
        assert _panel_grid(7, None) == (1, 7)
        assert _panel_grid(16, None) == (4, 4)
        assert _panel_grid(8, 2) == (2, 4)

    def test_panel_grid_rejects_nondivisor(self):
        with pytest.raises(ValueError):
            _panel_grid(8, 5)


class TestPlacement:
    def test_deterministic(self):
        cfg = ExperimentConfig()
        a = place_users(cfg, 42)
        b = place_users(cfg, 42)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_user_count_change_keeps_existing_draws(self):
        cfg2 = ExperimentConfig(K_I=2)
        cfg3 = ExperimentConfig(K_I=3)
        iu2, eu2 = place_users(cfg2, 7)
        iu3, eu3 = place_users(cfg3, 7)
        assert np.array_equal(iu2, iu3[:2])
        assert np.array_equal(eu2, eu3)

    def test_clusters_and_radii(self):
        cfg = ExperimentConfig(K_I=40, K_E=40, r_I=2.5, r_E=1.0)
        iu, eu = place_users(cfg, 5)
        assert np.all(np.abs(iu[:, 2]) == 0) and np.all(np.abs(eu[:, 2]) == 0)
        iu_c = np.array([cfg.d_x, -cfg.d_y2, 0.0])
        eu_c = np.array([cfg.d_x, cfg.d_y1, 0.0])
        assert np.all(np.linalg.norm(iu - iu_c, axis=1) <= 2.5 + 1e-12)
        assert np.all(np.linalg.norm(eu - eu_c, axis=1) <= 1.0 + 1e-12)


class TestScenarioTemplate:
    def test_two_panel_layout(self):
        sc = build_scenario(ExperimentConfig(), trial_seed=1)
        assert len(sc.irs) == 2
        assert np.array_equal(sc.irs[0].reference_position, [0.0, 8.0, 0.0])
        assert np.array_equal(sc.irs[1].reference_position, [0.0, -100.0, 0.0])
        assert np.array_equal(sc.ap_position, [3.5, 0.0, 0.0])
        assert sc.seed == 1

    def test_panel_count_follows_l(self):
        assert len(build_scenario(ExperimentConfig(L=1), 1).irs) == 1
        assert len(build_scenario(ExperimentConfig(L=0), 1).irs) == 0

    def test_fading_pass_through(self):
        plain = build_scenario(ExperimentConfig(), 1)
        mixed = build_scenario(ExperimentConfig(ap_irs_fading="los,rayleigh"), 1)
        assert plain.ap_irs_fading == "los"
        assert mixed.ap_irs_fading == ("los", "rayleigh")

    def test_problem_targets(self):
        cfg = ExperimentConfig(gamma0_db=10.0, E0=2e-6, qos_ratio_alpha=0.5)
        problem = build_problem(cfg, build_scenario(cfg, 1))
        assert np.allclose(problem.targets.sinr_min, 5.0)
        assert np.allclose(problem.targets.harvest_min_w, 1e-6)
        assert np.allclose(problem.noise_pow, 1e-12)

    def test_energy_beam_toggle(self):
        cfg = ExperimentConfig(energy_beams_enabled=False)
        problem = build_problem(cfg, build_scenario(cfg, 1))
        assert problem.n_energy_beams == 0


class TestRunner:
    def test_csv_layout_and_row_order(self, tmp_path):
        cfg = tiny_config(n_seeds=2, solvers=("no_irs", "fixed_phase"),
                          sweep_values=(8.0, 10.0))
        out, failures = run_experiment(cfg, out_path=tmp_path / "r.csv")
        assert failures == 0
        with open(out, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == MAIN_COLUMNS
        body = rows[1:]
        assert len(body) == 2 * 2 * 2
        key = [(r[1], r[2], r[3]) for r in body]
        assert key == [(str(sv), str(3 + t), s)
                       for sv in (8.0, 10.0) for t in range(2)
                       for s in ("no_irs", "fixed_phase")]

    def test_rows_are_self_consistent(self, tmp_path):
        out, _ = run_experiment(tiny_config(), out_path=tmp_path / "r.csv")
        with open(out, newline="") as f:
            row = dict(zip(MAIN_COLUMNS, list(csv.reader(f))[1]))
        assert row["feasible"] in ("True", "False")
        p = float(row["power_w"])
        assert float(row["power_dbm"]) == pytest.approx(power_dbm(p))
        assert int(row["n_antennas"]) == 2
        assert int(row["n_elements"]) == 2  # the instance size, not the solver's view

    def test_byte_identical_reruns(self, tmp_path):
        cfg = tiny_config()
        a, _ = run_experiment(cfg, out_path=tmp_path / "a.csv")
        b, _ = run_experiment(cfg, out_path=tmp_path / "b.csv")
        assert a.read_bytes() == b.read_bytes()

    def test_worker_count_does_not_change_bytes(self, tmp_path):
        cfg = tiny_config(n_seeds=2)
        serial, _ = run_experiment(cfg, workers=1, out_path=tmp_path / "s.csv")
        parallel, _ = run_experiment(cfg, workers=2, out_path=tmp_path / "p.csv")
        assert serial.read_bytes() == parallel.read_bytes()

    def test_timing_sidecar(self, tmp_path):
        out, _ = run_experiment(tiny_config(), out_path=tmp_path / "r.csv")
        side = timing_path_for(out)
        assert side.name == "r.timing.csv" and side.exists()
        with open(side, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == TIMING_COLUMNS
        assert len(rows) == 2  # header + one row
        assert float(rows[1][-1]) > 0.0
        assert "wall_time_s" not in MAIN_COLUMNS

    def test_base_seed_override(self, tmp_path):
        out, _ = run_experiment(tiny_config(), out_path=tmp_path / "r.csv",
                                base_seed=77)
        with open(out, newline="") as f:
            row = dict(zip(MAIN_COLUMNS, list(csv.reader(f))[1]))
        assert row["seed"] == "77"

    def test_crashed_solver_counted_not_fatal(self, tmp_path):
        # separate_beams has no nullspace at K_I = M and raises
        cfg = tiny_config(M=2, K_I=2, K_E=1, n_seeds=2,
                          solvers=("no_irs", "separate_beams"))
        log = io.StringIO()
        out, failures = run_experiment(cfg, out_path=tmp_path / "r.csv", log=log)
        assert failures == 2
        assert "separate_beams" in log.getvalue()
        with open(out, newline="") as f:
            assert len(list(csv.reader(f))) == 1 + 2  # header + no_irs rows only

    def test_power_dbm_edge(self):
        assert power_dbm(0.001) == pytest.approx(0.0)
        assert power_dbm(0.0) == float("-inf")
