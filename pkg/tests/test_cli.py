import json

import numpy as np
import pytest

from capdrop.cli import COMMANDS, dispatch, main, parse_config
from capdrop.errors import ConfigError

MINIMAL = """
[params]
g = 0.0
sigma = 1.0
gamma_jump = 0.0
volume = 3.14159265
"""

FLAT = """
# flat sessile cap
[params]
g = 0.0
sigma = 1.0
gamma_jump = 0.0
volume = 3.141592653589793

[grid]
n = 400

[run]
perturbation = 0.05:2
t_end = 0.5
seed = 0
"""


class TestParseConfig:
    def test_minimal_accepted(self):
        config = parse_config(MINIMAL)
        assert config.params.sigma == 1.0
        assert config.grid_n == 400
        assert config.options["seed"] == 0

    def test_young_violation_rejected(self):
        bad = MINIMAL.replace("gamma_jump = 0.0", "gamma_jump = 1.5")
        with pytest.raises(ConfigError) as err:
            parse_config(bad)
        assert "gamma_jump" in str(err.value)

    def test_unknown_key_named(self):
        bad = MINIMAL + "sigmma = 1\n"
        with pytest.raises(ConfigError) as err:
            parse_config(bad)
        assert err.value.key == "sigmma"

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError):
            parse_config(MINIMAL + "[solver]\nx = 1\n")

    def test_missing_required_key(self):
        with pytest.raises(ConfigError) as err:
            parse_config("[params]\ng = 0.0\nsigma = 1.0\nvolume = 1.0\n")
        assert err.value.key == "gamma_jump"

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError):
            parse_config(MINIMAL + "g = 1.0\n")

    def test_bad_schedule_rejected(self):
        with pytest.raises(ConfigError):
            parse_config(MINIMAL + "[run]\neps_schedule = 1e-3,1e-2\n")

    def test_bad_subspace_rejected(self):
        with pytest.raises(ConfigError):
            parse_config(MINIMAL + "[run]\nsubspace = sideways\n")

    def test_bad_perturbation_rejected(self):
        with pytest.raises(ConfigError):
            parse_config(MINIMAL + "[run]\nperturbation = lots\n")

    def test_comments_and_blanks_ignored(self):
        config = parse_config("# intro\n\n" + MINIMAL + "\n# done\n")
        assert config.params.volume == pytest.approx(3.14159265)


class TestDispatch:
    def test_equilibrate_flat(self, tmp_path):
        config = parse_config(FLAT)
        assert dispatch("equilibrate", config, tmp_path) == 0
        rows = (tmp_path / "profile.csv").read_text().splitlines()
        assert rows[0] == "theta,rho"
        rho = np.array([float(r.split(",")[1]) for r in rows[1:]])
        assert np.max(np.abs(rho - 1.0)) < 1e-6
        payload = json.loads((tmp_path / "solution.json").read_text())
        assert payload["schema_version"] == 1
        assert abs(payload["multiplier"] - 1.0) < 1e-6

    def test_csv_precision(self, tmp_path):
        config = parse_config(FLAT.replace("volume = 3.141592653589793", "volume = 3.1"))
        dispatch("equilibrate", config, tmp_path)
        value = (tmp_path / "profile.csv").read_text().splitlines()[2].split(",")[1]
        assert len(value.replace(".", "").replace("-", "").lstrip("0")) >= 15

    def test_spectrum_gap(self, tmp_path):
        config = parse_config(FLAT)
        assert dispatch("spectrum", config, tmp_path) == 0
        payload = json.loads((tmp_path / "spectrum.json").read_text())
        assert abs(payload["gap"] - 3.0) / 3.0 < 0.02
        assert payload["subspace"] == "doubly-constrained"

    def test_kernel_outputs(self, tmp_path):
        config = parse_config(FLAT)
        assert dispatch("kernel", config, tmp_path) == 0
        payload = json.loads((tmp_path / "kernel.json").read_text())
        assert payload["xi6_jump"] > 0.1
        header = (tmp_path / "kernel.csv").read_text().splitlines()[0]
        assert header == "theta,Q,xi5,xi6,xi_s"

    def test_recentre_deterministic(self, tmp_path):
        config = parse_config(FLAT.replace("0.05:2", "random:0.01"))
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert dispatch("recentre", config, out1) == 0
        assert dispatch("recentre", config, out2) == 0
        assert (out1 / "frame.json").read_bytes() == (out2 / "frame.json").read_bytes()

    def test_equilibrate_byte_identical(self, tmp_path):
        config = parse_config(FLAT)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        dispatch("equilibrate", config, out1)
        dispatch("equilibrate", config, out2)
        assert (out1 / "profile.csv").read_bytes() == (out2 / "profile.csv").read_bytes()
        assert (out1 / "solution.json").read_bytes() == (out2 / "solution.json").read_bytes()

    def test_seed_changes_random_outputs(self, tmp_path):
        config = parse_config(FLAT.replace("0.05:2", "random:0.01"))
        out1, out2 = tmp_path / "a", tmp_path / "b"
        dispatch("recentre", config, out1)
        dispatch("recentre", config, out2, seed=1)
        assert (out1 / "frame.json").read_bytes() != (out2 / "frame.json").read_bytes()

    def test_relax_trace(self, tmp_path):
        config = parse_config(FLAT)
        assert dispatch("relax", config, tmp_path) == 0
        payload = json.loads((tmp_path / "trace.json").read_text())
        assert payload["energy_monotone"] is True
        assert payload["volume_drift"] <= 1e-8
        header = (tmp_path / "trace.csv").read_text().splitlines()[0]
        assert header == "t,E,V,pole_x,rho_lo,rho_hi,dist"

    def test_numerical_failure_exit_code(self, tmp_path):
        # a deep-waisted perturbation breaks star-shapedness during the scan
        config = parse_config(
            FLAT.replace("perturbation = 0.05:2", "perturbation = 0.9:2")
            .replace("t_end = 0.5", "t_end = 0.5\ndelta = 0.5")
        )
        code = dispatch("recentre", config, tmp_path)
        assert code == 3
        diag = json.loads((tmp_path / "error.json").read_text())
        assert diag["error"] == "RecentreDomainError"

    def test_plots_rendered(self, tmp_path):
        config = parse_config(FLAT)
        assert dispatch("spectrum", config, tmp_path, plots=True) == 0
        svg = (tmp_path / "spectrum.svg").read_text()
        assert svg.lstrip().startswith("<?xml")

    def test_spectrum_with_gravity_uses_shooting(self, tmp_path):
        config = parse_config(FLAT.replace("g = 0.0", "g = 1.0").replace(
            "gamma_jump = 0.0", "gamma_jump = -0.3"))
        assert dispatch("spectrum", config, tmp_path) == 0
        payload = json.loads((tmp_path / "spectrum.json").read_text())
        assert payload["gap"] > 0

    def test_degenerate_trace_serializes_null(self, tmp_path):
        # relaxing the equilibrium itself leaves no tail to fit; the JSON must
        # stay strict (null, not NaN)
        config = parse_config(FLAT.replace("perturbation = 0.05:2", "perturbation ="))
        assert dispatch("relax", config, tmp_path) == 0
        text = (tmp_path / "trace.json").read_text()
        assert "NaN" not in text
        payload = json.loads(text)
        assert payload["decay_rate"] is None
        assert payload["final_err"] < 1e-10

    def test_verify_flat_cap_all_pass(self, tmp_path):
        config = parse_config(FLAT)
        assert dispatch("verify", config, tmp_path) == 0
        payload = json.loads((tmp_path / "verify.json").read_text())
        assert payload["all_passed"] is True
        gating = [c for c in payload["checks"] if c["gating"]]
        assert len(gating) >= 20
        assert all(c["passed"] for c in gating)


class TestMain:
    def test_usage_error_exit_1(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["not-a-command", "--config", "x"])
        assert exc.value.code == 1

    def test_missing_config_exit_1(self, tmp_path):
        assert main(["spectrum", "--config", str(tmp_path / "nope.cfg")]) == 1

    def test_validation_exit_2(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text(MINIMAL.replace("gamma_jump = 0.0", "gamma_jump = 2.0"))
        assert main(["spectrum", "--config", str(cfg), "--out", str(tmp_path)]) == 2

    def test_commands_list_stable(self):
        assert COMMANDS == (
            "equilibrate",
            "sweep-eps",
            "spectrum",
            "kernel",
            "recentre",
            "relax",
            "verify",
        )
