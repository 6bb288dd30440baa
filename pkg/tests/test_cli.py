from __future__ import annotations

import json

import numpy as np
import pytest

from scatshift.cli import ConfigError, ExperimentConfig, apply_override, read_config, run


def read(path):
    return json.loads(path.read_text())


class TestConfig:
    def test_bundled(self):
        for name in ("univariate", "thinplate", "cusp", "two_density"):
            assert isinstance(read_config(name), dict)

    def test_override_parsing(self):
        cfg = apply_override({}, "centers.spacing=0.01")
        apply_override(cfg, "target=cusp:alpha=0.6")
        assert cfg == {"centers": {"spacing": 0.01}, "target": "cusp:alpha=0.6"}
        with pytest.raises(ConfigError):
            apply_override(cfg, "novalue")

    @pytest.mark.parametrize("raw,command", [
        ({"reproduction": {"nu": 1.5}}, "nterm"),
        ({"reproduction": {"nu": 0.5}}, "approximate"),
        ({"majorant": {"r": 0.6}, "reproduction": {"nu": 2}}, "density"),
        ({"centers": {"generator": "random", "n": 10}}, "density"),
        ({"basis": {"kind": "surface-spline", "d": 2}}, "density"),
        ({"norm": {"s": 2.0}}, "low-smooth"),
        ({"budgets": [0]}, "rates"),
        ({"colour": 1}, "density"),
    ])
    def test_cross_field_validation(self, raw, command):
        with pytest.raises(ConfigError):
            ExperimentConfig(raw, command)

    def test_resolved_embeds_everything(self):
        cfg = ExperimentConfig(read_config("thinplate"), "approximate")
        res = cfg.resolved()
        assert res["resolved"]["reproduction"]["n"] == 5
        assert res["resolved"]["basis"]["kappa"] == 4


class TestExitCodes:
    def test_unknown_command(self, tmp_path):
        assert run(["frobnicate"]) == 2

    def test_no_command(self):
        assert run([]) == 2

    def test_missing_config(self, tmp_path):
        assert run(["density", "-c", str(tmp_path / "nope.json")]) == 2

    def test_malformed_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        assert run(["density", "-c", str(p), "--out", str(tmp_path)]) == 2

    def test_malformed_centers_names_row(self, tmp_path, capsys):
        csv = tmp_path / "c.csv"
        csv.write_text("x0\n0.0\n0.5\n0.25,1.0\n")
        code = run(["density", "-c", "univariate", "--centers", str(csv), "--out", str(tmp_path)])
        assert code == 2
        assert "row 4" in capsys.readouterr().err

    def test_unknown_target(self, tmp_path):
        assert run(["approximate", "-c", "univariate", "--target", "nosuch", "--out", str(tmp_path)]) == 2

    def test_failed_certificate(self, tmp_path):
        code = run(["verify", "-c", "univariate", "--set", "certificate.C=0.01", "--out", str(tmp_path)])
        assert code == 1
        assert read(tmp_path / "verify.json")["passed"] is False


class TestCommands:
    def test_verify_univariate(self, tmp_path):
        assert run(["verify", "-c", "univariate", "--out", str(tmp_path)]) == 0
        rep = read(tmp_path / "verify.json")
        assert rep["a4"]["c_meas"] <= 4 and rep["a4"]["c_refined"] <= 4
        assert rep["schur"]["passed"] and rep["wavelets"]["passed"]
        assert rep["config"]["resolved"]["command"] == "verify"

    def test_density(self, tmp_path):
        assert run(["density", "-c", "two_density", "--out", str(tmp_path)]) == 0
        rep = read(tmp_path / "density.json")
        assert rep["H_dominates_h"] and rep["slow_variation_ok"]
        h = np.loadtxt(tmp_path / "h.csv", delimiter=",", skiprows=1)
        H = np.loadtxt(tmp_path / "H.csv", delimiter=",", skiprows=1)
        assert np.all(H[:, 1] >= h[:, 1] * (1 - 1e-12))

    def test_approximate(self, tmp_path):
        assert run(["approximate", "-c", "univariate", "--out", str(tmp_path)]) == 0
        rep = read(tmp_path / "approximate.json")
        assert rep["errors"]["sup"] < 1e-2
        assert rep["certificate"]["C0"] > 0
        lines = (tmp_path / "errors.csv").read_text().splitlines()
        assert lines[0] == "param,norm,value" and len(lines) >= 4
        assert read(tmp_path / "approximant.json")

    def test_low_smooth(self, tmp_path):
        code = run(["low-smooth", "-c", "cusp", "--set", "norm.s=1.0", "--set", 'norm.p="inf"',
                    "--out", str(tmp_path)])
        assert code == 0
        rep = read(tmp_path / "low-smooth.json")
        assert rep["weighted_error"] is not None and rep["ratio"] < 1

    def test_nterm_accounting(self, tmp_path):
        assert run(["nterm", "-c", "cusp", "-N", "16384", "--out", str(tmp_path)]) == 0
        rep = read(tmp_path / "nterm.json")
        alloc = rep["allocation"]
        assert alloc["total_cost"] <= 16384
        assert rep["distinct_centers"] <= rep["raw_centers"] <= alloc["total_centers"] <= 16384

    def test_rates_nterm_csv(self, tmp_path):
        code = run(["rates", "-c", "cusp", "--mode", "nterm", "--set", "budgets=[4096,8192,16384,32768]",
                    "--out", str(tmp_path)])
        assert code == 0
        lines = (tmp_path / "rates.csv").read_text().splitlines()
        assert lines[0] == "N,error,slope_to_date" and len(lines) == 5
        assert read(tmp_path / "rates.json")["reference_slope"] == -2.0

    def test_rates_linear_univariate(self, tmp_path):
        assert run(["rates", "-c", "univariate", "--out", str(tmp_path)]) == 0
        rep = read(tmp_path / "rates.json")
        assert 1.7 <= rep["slope"] <= 2.3
        assert (tmp_path / "rates.csv").read_text().startswith("h,error,slope_to_date")

    def test_rates_uniform(self, tmp_path):
        code = run(["rates", "-c", "cusp", "--mode", "uniform", "--set", "budgets=[16,32,64,128]",
                    "--out", str(tmp_path)])
        assert code == 0
        assert read(tmp_path / "rates.json")["slope"] < 0


class TestReproducibility:
    def test_byte_identical_reports(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        args = ["density", "-c", "univariate", "--set", "centers.generator=\"jittered\"",
                "--set", "centers.seed=3"]
        assert run(args + ["--out", str(a)]) == 0
        assert run(args + ["--out", str(b)]) == 0
        for name in ("density.json", "h.csv", "H.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_env_overrides_out(self, tmp_path, monkeypatch):
        env = tmp_path / "env"
        monkeypatch.setenv("SCATSHIFT_OUTDIR", str(env))
        assert run(["density", "-c", "univariate", "--out", str(tmp_path / "flag")]) == 0
        assert (env / "density.json").exists()
        assert not (tmp_path / "flag").exists()

    def test_module_entry_point(self, tmp_path):
        import subprocess
        import sys
        proc = subprocess.run([sys.executable, "-m", "scatshift", "density", "-c", "univariate",
                               "--out", str(tmp_path)], capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert "ok" in proc.stdout
