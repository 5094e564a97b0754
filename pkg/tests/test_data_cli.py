import io
import json

import numpy as np
import pytest

from tctvp.cli import main
from tctvp.config import config_hash, load_config
from tctvp.data import TimeSeriesPanel, emit, ingest, period_range
from tctvp.errors import ConfigError, GapError, ParseError


class TestIngest:
    def test_pct_change_formula(self):
        csv = "date,a\n2000Q1,100\n2000Q2,101\n"
        panel = ingest(io.StringIO(csv), transforms={"a": "pct-change"})
        assert panel.values[0, 0] == pytest.approx(1.0)
        assert panel.dates == ("2000Q2",)

    def test_log_transform(self):
        csv = "date,a\n2000Q1,1.0\n2000Q2,2.0\n"
        panel = ingest(io.StringIO(csv), transforms={"a": "log"})
        assert panel.values[0, 0] == 0.0
        assert panel.values[1, 0] == pytest.approx(np.log(2.0))

    def test_parse_error_location(self):
        csv = "date,a,b\n2000Q1,1.0,2.0\n2000Q2,oops,3.0\n"
        with pytest.raises(ParseError, match="row 3.*'a'"):
            ingest(io.StringIO(csv))

    def test_gap_error(self):
        csv = "date,a\n2000Q1,1.0\n2000Q3,2.0\n"
        with pytest.raises(GapError):
            ingest(io.StringIO(csv))

    def test_bad_period(self):
        csv = "date,a\n2000M1,1.0\n"
        with pytest.raises(ParseError):
            ingest(io.StringIO(csv))

    def test_roundtrip_bit_exact(self):
        rng = np.random.default_rng(0)
        panel = TimeSeriesPanel(
            dates=tuple(period_range("1987Q3", 17)),
            values=rng.standard_normal((17, 3)) * np.pi,
            names=("x", "y", "z"),
            pre_sample=5,
        )
        buf = io.StringIO()
        emit(panel, buf)
        buf.seek(0)
        back = ingest(buf, pre_sample=5)
        assert back.dates == panel.dates
        assert back.names == panel.names
        np.testing.assert_array_equal(back.values, panel.values)


class TestConfig:
    def base(self):
        return {"model": {"type": "var-flat", "lags": 2}}

    def test_defaults_merged(self):
        cfg = load_config(self.base())
        assert cfg["chain"]["iterations"] == 20_000
        assert cfg["prior"]["lam_upper"] == 1e10

    def test_unknown_key_rejected(self):
        bad = self.base()
        bad["modle"] = {}
        with pytest.raises(ConfigError, match="modle"):
            load_config(bad)

    def test_nested_unknown_key_rejected(self):
        bad = self.base()
        bad["chain"] = {"iterations": 10, "burnin": 2}
        with pytest.raises(ConfigError):
            load_config(bad)

    def test_burn_in_check(self):
        bad = self.base()
        bad["chain"] = {"iterations": 10, "burn_in": 10}
        with pytest.raises(ConfigError):
            load_config(bad)

    def test_hash_stable_under_key_order(self):
        a = load_config({"model": {"type": "var-flat", "lags": 2}})
        b = load_config({"model": {"lags": 2, "type": "var-flat"}})
        assert config_hash(a) == config_hash(b)


@pytest.fixture()
def sim_config(tmp_path):
    cfg = {
        "model": {"type": "tc-tvp", "lags": 1},
        "theory": {"name": "nk-small"},
        "simulate": {"periods": 90, "start": "1985Q1"},
        "chain": {"seed": 5, "iterations": 120, "burn_in": 40, "thinning": 4},
        "prior": {"fix_gamma": 20.0},
        "data": {"pre_sample": 30},
        "forecast": {"horizons": [1, 2], "ndraws": 60, "origins": ["2004Q1", "2004Q2"]},
        "irf": {"dates": ["2000Q1"], "horizons": 6, "shocks": [2], "cumulative": {"YGR": True}},
        "ml_grid": {"lam": [0.5, 2.0], "gamma": [0.0, 5.0]},
        "output": {"dir": str(tmp_path / "runs")},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path, tmp_path


class TestCli:
    def test_simulate_seed_determinism(self, sim_config):
        path, tmp = sim_config
        assert main(["--config", str(path), "--out", str(tmp / "s1"), "simulate"]) == 0
        assert main(["--config", str(path), "--out", str(tmp / "s2"), "simulate"]) == 0
        a = (tmp / "s1" / "simulated.csv").read_bytes()
        b = (tmp / "s2" / "simulated.csv").read_bytes()
        assert a == b

    def test_estimate_then_downstream(self, sim_config):
        path, tmp = sim_config
        assert main(["--config", str(path), "--out", str(tmp / "sim"), "simulate"]) == 0
        data = str(tmp / "sim" / "simulated.csv")
        assert (
            main(
                ["--config", str(path), "--data", data, "--out", str(tmp / "est"), "estimate"]
            )
            == 0
        )
        meta = json.loads((tmp / "est" / "meta.json").read_text())
        assert {"command", "version", "config_hash", "seed", "wall_clock_seconds"} <= set(meta)
        draws_meta = json.loads((tmp / "est" / "draws" / "meta.json").read_text())
        assert draws_meta["model"] == "tc-tvp"

        # forecast from the persisted draws, no refitting
        assert (
            main(
                [
                    "--config",
                    str(path),
                    "--data",
                    data,
                    "--out",
                    str(tmp / "fc"),
                    "forecast",
                    "--run-dir",
                    str(tmp / "est"),
                ]
            )
            == 0
        )
        lines = (tmp / "fc" / "forecast.csv").read_text().splitlines()
        assert lines[0] == "origin,horizon,variable,mean,q10,q50,q90"
        assert len(lines) == 1 + 2 * 3

        assert (
            main(
                [
                    "--config",
                    str(path),
                    "--out",
                    str(tmp / "irf"),
                    "irf",
                    "--run-dir",
                    str(tmp / "est"),
                ]
            )
            == 0
        )
        header = (tmp / "irf" / "irf.csv").read_text().splitlines()[0]
        assert header == "date,shock,variable,horizon,q10,q50,q90"

    def test_estimate_reproducible_artifacts(self, sim_config):
        path, tmp = sim_config
        main(["--config", str(path), "--out", str(tmp / "sim"), "simulate"])
        data = str(tmp / "sim" / "simulated.csv")
        for name in ("e1", "e2"):
            assert (
                main(
                    ["--config", str(path), "--data", data, "--out", str(tmp / name), "estimate"]
                )
                == 0
            )
        for f in ("phi.f64", "sigma_u.f64", "lam.f64"):
            assert (tmp / "e1" / "draws" / f).read_bytes() == (
                tmp / "e2" / "draws" / f
            ).read_bytes()

    def test_ml_grid(self, sim_config):
        path, tmp = sim_config
        main(["--config", str(path), "--out", str(tmp / "sim"), "simulate"])
        data = str(tmp / "sim" / "simulated.csv")
        assert (
            main(["--config", str(path), "--data", data, "--out", str(tmp / "grid"), "ml-grid"])
            == 0
        )
        lines = (tmp / "grid" / "ml_grid.csv").read_text().splitlines()
        assert lines[0] == "lam,gamma,log_ml,log_fit,log_penalty"
        assert len(lines) == 1 + 4

    def test_exit_code_user_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["--config", str(bad), "simulate"]) == 1

    def test_exit_code_numerical_failure(self, tmp_path):
        from tctvp.statespace import MEDIAN_THETA

        theta = MEDIAN_THETA.to_array().tolist()
        theta[5] = 0.2  # policy response below the determinacy threshold
        cfg = {
            "model": {"type": "tc-tvp", "lags": 1},
            "theory": {"name": "nk-small", "fixed_theta": theta},
            "simulate": {"periods": 20, "start": "1985Q1"},
            "output": {"dir": str(tmp_path / "runs")},
        }
        path = tmp_path / "c.json"
        path.write_text(json.dumps(cfg))
        assert main(["--config", str(path), "--out", str(tmp_path / "x"), "simulate"]) == 2
