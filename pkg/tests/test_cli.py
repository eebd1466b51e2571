import json
import numpy as np
import pytest

from tvspline import cli
from tvspline.experiments import SolverDidNotConverge


def run_cli(args):
    return cli.main(args)


class TestReconstruct:
    def test_writes_artifacts(self, tmp_path, capsys):
        code = run_cli([
            "reconstruct", "--order", "2", "--cutoff", "3", "--grid", "32",
            "--lambda", "1e-6", "--seed", "1", "--out-dir", str(tmp_path),
        ])
        assert code == 0
        assert (tmp_path / "profile.csv").exists()
        assert (tmp_path / "summary.json").exists()
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["results"]["raw_knots"] >= 1
        assert "raw_knots=" in capsys.readouterr().out
        # No stray temporary files.
        assert not list(tmp_path.glob("*.tmp-*"))

    def test_deterministic_outputs(self, tmp_path):
        outs = []
        for sub in ("a", "b"):
            d = tmp_path / sub
            run_cli([
                "reconstruct", "--order", "2", "--cutoff", "3", "--grid", "32",
                "--lambda", "1e-6", "--seed", "9", "--out-dir", str(d),
            ])
            outs.append((d / "profile.csv").read_bytes())
        assert outs[0] == outs[1]


class TestConvergenceCommand:
    def test_runs_with_grid_list(self, tmp_path):
        code = run_cli([
            "convergence", "--order", "2", "--cutoff", "3",
            "--grid", "16,32,64", "--lambda", "1e-6", "--trials", "1",
            "--seed", "5", "--out-dir", str(tmp_path),
        ])
        assert code == 0
        lines = (tmp_path / "convergence.csv").read_text().splitlines()
        assert lines[0] == "P,mean_error,std_error,n_ok_trials"
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert "slope" in summary["results"]

    def test_too_few_grid_sizes(self, tmp_path, capsys):
        code = run_cli([
            "convergence", "--grid", "16,32", "--out-dir", str(tmp_path),
        ])
        assert code == 2
        assert "error" in capsys.readouterr().err


class TestNoisyDemo:
    def test_runs(self, tmp_path):
        code = run_cli([
            "noisy-demo", "--order", "1", "--cutoff", "8", "--grid", "64",
            "--lambda", "1e-2", "--sigma", "1e-3", "--knots", "3",
            "--seed", "2", "--out-dir", str(tmp_path),
        ])
        assert code == 0
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert "linf_error_lowpass" in summary["results"]

    def test_full_scale_beats_lowpass(self, tmp_path):
        code = run_cli([
            "noisy-demo", "--order", "1", "--cutoff", "20", "--grid", "256",
            "--lambda", "1e-2", "--sigma", "1e-3", "--knots", "7",
            "--seed", "1", "--out-dir", str(tmp_path),
        ])
        assert code == 0
        results = json.loads((tmp_path / "summary.json").read_text())["results"]
        assert results["linf_error"] < results["linf_error_lowpass"]
        assert 7 <= results["raw_knots"] <= 40


class TestConfigHandling:
    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({
            "order": 2, "cutoff": 3, "grid": "32", "lambda": 1e-6,
            "seed": 4, "out-dir": str(tmp_path / "from_config"),
        }))
        out = tmp_path / "overridden"
        code = run_cli(["reconstruct", "--config", str(cfg), "--out-dir", str(out)])
        assert code == 0
        assert (out / "summary.json").exists()
        assert not (tmp_path / "from_config").exists()

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"grd": "32"}))
        assert run_cli(["reconstruct", "--config", str(cfg)]) == 2

    def test_bad_grid_value(self, tmp_path):
        assert run_cli(["reconstruct", "--grid", "abc", "--out-dir", str(tmp_path)]) == 2

    def test_missing_config_file(self, tmp_path):
        assert run_cli(["reconstruct", "--config", str(tmp_path / "nope.json")]) == 2

    def test_solver_choice_validated(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run_cli(["reconstruct", "--solver", "magic", "--out-dir", str(tmp_path)])
        assert exc.value.code == 2


class TestNonConvergenceExit:
    def test_exit_code_3(self, tmp_path, monkeypatch, capsys):
        def boom(config):
            raise SolverDidNotConverge("did not converge")

        monkeypatch.setattr(cli, "run_experiment", boom)
        code = run_cli([
            "reconstruct", "--order", "2", "--cutoff", "3", "--grid", "32",
            "--lambda", "1e-6", "--out-dir", str(tmp_path),
        ])
        assert code == 3
        assert "converge" in capsys.readouterr().err
