import json

import numpy as np
import pytest

from deconvdens.cli import load_config, main, ValidationError


def _write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def _run(*argv):
    return main(list(argv))


RATES_CFG = {
    "class": {"beta": [2.0], "r": [2.0], "p": 2.0},
    "rates": {"alpha": 0.0, "mu": [1.0], "n": 1024},
}


class TestConfig:
    def test_unknown_key_rejected(self, tmp_path):
        cfg = _write_cfg(tmp_path, {"clas": {"beta": [2.0]}})
        assert _run("--config", cfg, "--output", str(tmp_path), "rates") == 2

    def test_unknown_nested_key_rejected(self, tmp_path):
        bad = dict(RATES_CFG)
        bad["rates"] = {"aplha": 1.0}
        cfg = _write_cfg(tmp_path, bad)
        assert _run("--config", cfg, "--output", str(tmp_path), "rates") == 2

    def test_malformed_json(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text("{not json")
        assert _run("--config", str(p), "--output", str(tmp_path),
                    "rates") == 2

    def test_toml_config(self, tmp_path):
        p = tmp_path / "cfg.toml"
        p.write_text(
            "[class]\nbeta = [2.0]\nr = [2.0]\np = 2.0\n"
            "[rates]\nalpha = 0.0\nmu = [1.0]\nn = 1024\n")
        cfg = load_config(p)
        assert cfg["class"]["beta"] == [2.0]
        assert _run("--config", str(p), "--output", str(tmp_path),
                    "rates") == 0

    def test_infinity_strings(self, tmp_path):
        cfg = {"class": {"beta": [2.0], "r": ["inf"], "p": 2.0}}
        path = _write_cfg(tmp_path, cfg)
        assert _run("--config", path, "--output", str(tmp_path), "rates") == 0

    def test_missing_class_section(self, tmp_path):
        cfg = _write_cfg(tmp_path, {"rates": {"n": 1024}})
        assert _run("--config", cfg, "--output", str(tmp_path), "rates") == 2


class TestRates:
    def test_golden_json(self, tmp_path):
        cfg = _write_cfg(tmp_path, RATES_CFG)
        assert _run("--config", cfg, "--output", str(tmp_path), "rates") == 0
        obj = json.loads((tmp_path / "rates.json").read_text())
        assert obj["zone"] == "dense"
        assert obj["rho"] == 0.4
        assert obj["rho_exact"] == "2/5"
        assert obj["consistent"] is True

    def test_sweep_csv(self, tmp_path):
        cfg = dict(RATES_CFG)
        cfg["rates"] = {"alpha": 1.0, "mu": [1.0], "n": 1024,
                        "sweep": {"param": "mu", "values": [1.0, 2.0]}}
        path = _write_cfg(tmp_path, cfg)
        assert _run("--config", path, "--output", str(tmp_path), "rates",
                    "--sweep") == 0
        lines = (tmp_path / "rates_sweep.csv").read_text().splitlines()
        assert lines[0] == "mu,zone,rho,varrho,consistent"
        assert len(lines) == 3
        # mu = 1 -> rho 2/7, mu = 2 -> rho 2/9 (17 significant digits)
        assert float(lines[1].split(",")[2]) == 2.0 / 7.0
        assert float(lines[2].split(",")[2]) == 2.0 / 9.0

    def test_sweep_without_section(self, tmp_path):
        cfg = _write_cfg(tmp_path, RATES_CFG)
        assert _run("--config", cfg, "--output", str(tmp_path), "rates",
                    "--sweep") == 2


class TestCheck:
    def test_laplace_report(self, tmp_path, capsys):
        cfg = _write_cfg(tmp_path, {
            "noise": {"name": "laplace", "alpha": 0.5},
        })
        assert _run("--config", cfg, "--output", str(tmp_path), "check") == 0
        out = capsys.readouterr().out
        assert "epsilon=" in out
        assert "M_inf=" in out
        assert "consistent with a bounded" in out

    def test_full_contamination_reports_upsilon(self, tmp_path, capsys):
        cfg = _write_cfg(tmp_path, {
            "noise": {"name": "laplace", "alpha": 1.0},
            "kernel": {"m": 4},
        })
        assert _run("--config", cfg, "--output", str(tmp_path), "check") == 0
        assert "upsilon0=" in capsys.readouterr().out

    def test_gaussian_full_contamination_rejected(self, tmp_path):
        cfg = _write_cfg(tmp_path, {
            "noise": {"name": "gaussian", "alpha": 1.0},
        })
        assert _run("--config", cfg, "--output", str(tmp_path), "check") == 2

    def test_kernel_decay_failure(self, tmp_path):
        # base smoothness 2 cannot dominate mu = 2 at full contamination
        cfg = _write_cfg(tmp_path, {
            "noise": {"name": "laplace", "alpha": 1.0},
            "kernel": {"m": 2},
        })
        assert _run("--config", cfg, "--output", str(tmp_path), "check") == 2


@pytest.fixture
def data_file(tmp_path):
    rng = np.random.default_rng(0)
    p = tmp_path / "sample.csv"
    np.savetxt(p, rng.normal(size=(200, 1)), delimiter=",", header="x0",
               comments="")
    return str(p)


EST_CFG = {
    "grid": {"mode": "isotropic", "k_min": -2, "k_max": 0},
    "estimate": {"points": 9, "window": [-1.0, 1.0], "traces": True},
}


class TestEstimate:
    def test_happy_path(self, tmp_path, data_file):
        cfg = _write_cfg(tmp_path, EST_CFG)
        out = tmp_path / "out"
        assert _run("--config", cfg, "--output", str(out), "--no-figures",
                    "estimate", data_file) == 0
        lines = (out / "estimates.csv").read_text().splitlines()
        assert len(lines) == 10  # header + 9 points
        assert lines[0].startswith("x1,f_hat,k1")
        assert (out / "traces.jsonl").exists()
        assert not (out / "estimates.png").exists()

    def test_figure_rendered_by_default(self, tmp_path, data_file):
        cfg = _write_cfg(tmp_path, EST_CFG)
        out = tmp_path / "fig"
        assert _run("--config", cfg, "--output", str(out),
                    "estimate", data_file) == 0
        assert (out / "estimates.png").stat().st_size > 0

    def test_rerun_byte_identical(self, tmp_path, data_file):
        cfg = _write_cfg(tmp_path, EST_CFG)
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert _run("--config", cfg, "--output", str(out), "--no-figures",
                        "estimate", data_file) == 0
        assert (a / "estimates.csv").read_bytes() \
            == (b / "estimates.csv").read_bytes()
        assert (a / "traces.jsonl").read_bytes() \
            == (b / "traces.jsonl").read_bytes()

    def test_missing_data_file_is_io_error(self, tmp_path):
        cfg = _write_cfg(tmp_path, EST_CFG)
        assert _run("--config", cfg, "--output", str(tmp_path), "--no-figures",
                    "estimate", str(tmp_path / "nope.csv")) == 3

    def test_no_data_given(self, tmp_path):
        cfg = _write_cfg(tmp_path, {"estimate": {"points": 9}})
        assert _run("--config", cfg, "--output", str(tmp_path), "--no-figures",
                    "estimate") == 2

    def test_noise_dimension_mismatch(self, tmp_path, data_file):
        cfg = _write_cfg(tmp_path, {"noise": {"name": "laplace", "d": 2,
                                              "alpha": 0.5}})
        assert _run("--config", cfg, "--output", str(tmp_path), "--no-figures",
                    "estimate", data_file) == 2


SIM_CFG = {
    "seed": 7,
    "simulate": {"density": "tensor_spline", "density_params": {"k": 1},
                 "sample_sizes": [128, 256], "replications": [2, 2],
                 "resolution": 21},
}


class TestSimulate:
    def test_happy_path(self, tmp_path, capsys):
        cfg = _write_cfg(tmp_path, SIM_CFG)
        out = tmp_path / "out"
        assert _run("--config", cfg, "--output", str(out), "--no-figures",
                    "simulate") == 0
        lines = (out / "risk.csv").read_text().splitlines()
        assert lines[0] == "n,mean_risk,se,theory_exponent"
        assert len(lines) == 3
        obj = json.loads((out / "risk.json").read_text())
        assert obj["sample_sizes"] == [128, 256]
        assert obj["slope"] is None  # only two sizes: no fit attempted
        assert "n=128 risk=" in capsys.readouterr().out

    def test_rerun_byte_identical(self, tmp_path):
        cfg = _write_cfg(tmp_path, SIM_CFG)
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert _run("--config", cfg, "--output", str(out), "--no-figures",
                        "simulate") == 0
        for name in ("risk.csv", "risk.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_seed_changes_results(self, tmp_path):
        cfg = _write_cfg(tmp_path, SIM_CFG)
        a, b = tmp_path / "a", tmp_path / "b"
        assert _run("--config", cfg, "--output", str(a), "--no-figures",
                    "simulate") == 0
        assert _run("--config", cfg, "--seed", "8", "--output", str(b),
                    "--no-figures", "simulate") == 0
        assert (a / "risk.csv").read_bytes() != (b / "risk.csv").read_bytes()

    def test_assert_rate_without_fit_exits_4(self, tmp_path):
        cfg = _write_cfg(tmp_path, SIM_CFG)
        assert _run("--config", cfg, "--output", str(tmp_path), "--no-figures",
                    "simulate", "--inject-constant", "--assert-rate") == 4

    def test_inject_constant_gives_flat_risk(self, tmp_path):
        cfg = _write_cfg(tmp_path, SIM_CFG)
        out = tmp_path / "flat"
        assert _run("--config", cfg, "--output", str(out), "--no-figures",
                    "simulate", "--inject-constant") == 0
        obj = json.loads((out / "risk.json").read_text())
        risks = obj["mean_risk"]
        assert risks[0] == risks[1]  # zero estimator: risk is deterministic

    def test_missing_sample_sizes(self, tmp_path):
        cfg = _write_cfg(tmp_path, {"simulate": {"resolution": 21}})
        assert _run("--config", cfg, "--output", str(tmp_path), "--no-figures",
                    "simulate") == 2


def test_validation_error_is_value_error():
    assert issubclass(ValidationError, ValueError)
