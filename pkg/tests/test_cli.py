"""CLI and CSV round-trip tests at desk scale."""

import math
from pathlib import Path

import numpy as np
import numpy.testing as npt
import pytest

from acnudge import runio
from acnudge.analysis import PowerLawFit, fit_power_law
from acnudge.assimilation import RunRecord
from acnudge.cli import ConfigError, main, parse_config_file, resolve_config
from acnudge.experiments import MinNodesResult, VelocityResult


DESK = [
    "--set", "n_points=256", "--set", "nu=1e-3", "--set", "seed=0",
]


class TestConfigResolution:
    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown configuration key"):
            resolve_config((), None, None, ["frobnicate=3"])

    def test_bad_value_rejected(self):
        with pytest.raises(ConfigError, match="bad value"):
            resolve_config((), None, None, ["nu=fast"])

    def test_range_checked(self):
        with pytest.raises(ConfigError, match="positive"):
            resolve_config((), None, None, ["mu=-3"])
        with pytest.raises(ConfigError, match=">= 8"):
            resolve_config((), None, None, ["n_points=4"])

    def test_missing_required(self):
        with pytest.raises(ConfigError, match="missing required"):
            resolve_config(("nu", "mu"), None, None, ["nu=1e-3"])

    def test_lists_parse(self):
        cfg = resolve_config((), None, None, ["nu_list=1e-2,3e-3", "seeds=0,1,2"])
        assert cfg["nu_list"] == (1e-2, 3e-3)
        assert cfg["seeds"] == (0, 1, 2)

    def test_flags_override_config_file(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text("nu = 1e-3  # comment\nmu = 100\n\n# full-line comment\n")
        cfg = resolve_config(("nu",), None, path, ["mu=250"])
        assert cfg["nu"] == 1e-3
        assert cfg["mu"] == 250.0

    def test_malformed_config_line(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text("this is not a key value pair\n")
        with pytest.raises(ConfigError, match="key=value"):
            parse_config_file(path)

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="unknown preset"):
            resolve_config((), "fig99", None, None)


class TestTables:
    def test_run_record_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        record = RunRecord(
            times=np.arange(5) * 1e-3,
            l2_errors=np.abs(rng.standard_normal(5)) * 1e-13,
            linf_errors=np.abs(rng.standard_normal(5)),
            converged_at=3e-3,
            probe_positions=rng.random(5),
        )
        path = tmp_path / "record.csv"
        runio.write_run_record(path, record, {"nu": 5e-4, "alpha": 1.0, "mu": 500.0, "m": 10, "c": 10.0, "seed": 3})
        meta, back = runio.read_run_record(path)
        npt.assert_array_equal(back.times, record.times)
        npt.assert_array_equal(back.l2_errors, record.l2_errors)
        npt.assert_array_equal(back.linf_errors, record.linf_errors)
        npt.assert_array_equal(back.probe_positions, record.probe_positions)
        assert back.converged_at == record.converged_at
        assert meta["nu"] == "0.00050000000000000001"
        assert meta["seed"] == "3"

    def test_min_nodes_round_trip(self, tmp_path):
        results = [
            MinNodesResult(nu=1e-3, m_h=7, obs_kind="uniform", seed=0, probes=((4, False), (7, True))),
            MinNodesResult(nu=1e-4, m_h=None, obs_kind="uniform", seed=1, error="no convergence"),
            MinNodesResult(nu=1e-4, m_h=21, obs_kind="probe", seed=0),
        ]
        path = tmp_path / "min_nodes.csv"
        runio.write_min_nodes(path, results, {"mu": 1000.0})
        pairs = runio.read_min_nodes_pairs(path, obs_kind="uniform")
        assert pairs == [(1e-3, 7)]
        all_pairs = runio.read_min_nodes_pairs(path)
        assert (1e-4, 21) in all_pairs

    def test_fit_summary_round_trip(self, tmp_path):
        fit = fit_power_law([(x, 0.2 * x**-0.5) for x in (1e-4, 1e-3, 1e-2)])
        path = tmp_path / "fit.csv"
        runio.write_fit_summary(path, fit, {"obs_kind": "uniform"})
        _, back = runio.read_fit_summary(path)
        assert back == fit

    def test_velocity_table(self, tmp_path):
        results = [
            VelocityResult(c=32.0, m=16, converge_time=26.5, locked=False),
            VelocityResult(c=64.0, m=16, converge_time=None, locked=True),
        ]
        path = tmp_path / "velocity.csv"
        runio.write_velocity_results(path, results, {"nu": 7.5e-6}, conjectured={64.0})
        _, cols = runio.read_table(path)
        assert cols["locked"] == ["false", "true"]
        assert cols["conjectured_locked"] == ["false", "true"]
        assert cols["converge_time"] == ["26.5", ""]

    def test_missing_column_named(self, tmp_path):
        path = tmp_path / "t.csv"
        runio.write_table(path, {"a": [1.0]}, {"k": 1})
        _, cols = runio.read_table(path)
        with pytest.raises(KeyError, match="missing column 'b'"):
            runio.float_column(cols, "b", str(path))

    def test_ragged_columns_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="ragged"):
            runio.write_table(tmp_path / "t.csv", {"a": [1], "b": [1, 2]}, {})


class TestCommands:
    def test_simulate_writes_initial_snapshot(self, tmp_path, capsys):
        rc = main([
            "simulate", *DESK,
            "--set", "snapshot_times=0",
            "--out-dir", str(tmp_path),
        ])
        assert rc == 0
        meta, cols = runio.read_table(tmp_path / "snapshot_t0.csv")
        assert meta["seed"] == "0"
        u = runio.float_column(cols, "u")
        x = runio.float_column(cols, "x")
        assert u.size == 257
        assert u[0] == 0.0 and u[-1] == 0.0
        assert math.isclose(math.sqrt((1.0 / 256) * float(np.dot(u, u))), 1e-2, rel_tol=1e-12)
        assert x[-1] == 1.0

    def test_simulate_reruns_byte_identical(self, tmp_path):
        args = ["simulate", *DESK, "--set", "snapshot_times=0,0.05", "--out-dir", str(tmp_path)]
        assert main(args) == 0
        first = {
            name: (tmp_path / name).read_bytes()
            for name in ("snapshot_t0.csv", "snapshot_t0.05.csv")
        }
        assert main(args) == 0
        for name, blob in first.items():
            assert (tmp_path / name).read_bytes() == blob

    def test_assimilate_single_run(self, tmp_path):
        rc = main([
            "assimilate", *DESK,
            "--set", "mu=500", "--set", "t_end=0.2", "--set", "obs_kind=probe",
            "--set", "m=6", "--set", "c=8", "--set", "spin_up=false",
            "--set", "snapshot_times=0.1",
            "--out-dir", str(tmp_path),
        ])
        assert rc == 0
        meta, record = runio.read_run_record(tmp_path / "record_probe_m6.csv")
        assert record.times[-1] == pytest.approx(0.2)
        assert record.probe_positions is not None
        snap_meta, cols = runio.read_table(tmp_path / "assimilate_probe_m6_t0.1.csv")
        assert "probe_x" in snap_meta
        assert set(cols) == {"x", "u", "v"}

    def test_assimilate_cfl_violation_exits_1(self, tmp_path, capsys):
        rc = main([
            "assimilate", *DESK,
            "--set", "mu=2500", "--set", "t_end=0.1",
            "--out-dir", str(tmp_path),
        ])
        assert rc == 1
        assert "2/mu" in capsys.readouterr().err

    def test_find_min_nodes_empty_nu_list_usage_error(self, tmp_path, capsys):
        rc = main(["find-min-nodes", "--set", "mu=100", "--out-dir", str(tmp_path)])
        assert rc == 1
        assert "nu_list" in capsys.readouterr().err

    def test_find_min_nodes_desk_pipeline_feeds_fit(self, tmp_path):
        rc = main([
            "find-min-nodes",
            "--set", "n_points=256", "--set", "nu_list=3e-3,1e-3,3e-4",
            "--set", "seeds=0", "--set", "mu=500",
            "--set", "threshold=1e-8", "--set", "t_star=10",
            "--set", "spin_up_cap=20", "--set", "obs_kind=probe", "--set", "c=8",
            "--out-dir", str(tmp_path),
        ])
        assert rc == 0
        table = tmp_path / "min_nodes_probe.csv"
        pairs = runio.read_min_nodes_pairs(table, obs_kind="probe")
        assert len(pairs) == 3
        rc = main([
            "fit-power-law",
            "--set", f"input={table}", "--set", "obs_kind=probe",
            "--out-dir", str(tmp_path),
        ])
        assert rc == 0
        _, fit = runio.read_fit_summary(tmp_path / "power_law_fit.csv")
        assert fit.n_points == 3
        _, lam_cols = runio.read_table(tmp_path / "length_scales.csv")
        assert len(lam_cols["nu"]) == 3
        rc = main([
            "estimate-lambda",
            "--set", f"input={tmp_path / 'power_law_fit.csv'}", "--set", "nu=1e-3",
        ])
        assert rc == 0

    def test_velocity_sweep_desk(self, tmp_path):
        rc = main([
            "velocity-sweep", *DESK,
            "--set", "mu=500", "--set", "m=6", "--set", "speeds=0,8",
            "--set", "threshold=1e-8", "--set", "time_cap=20",
            "--out-dir", str(tmp_path),
        ])
        assert rc == 0
        _, cols = runio.read_table(tmp_path / "velocity_sweep.csv")
        assert cols["locked"] == ["true", "false"]

    def test_fit_power_law_requires_input(self):
        assert main(["fit-power-law"]) == 1