from __future__ import annotations

import json

import pytest

from perturbed_leader.cli import ConfigError, main, parse_config
from perturbed_leader.scenarios import SCENARIOS, list_scenarios

BASE = """\
[experiment]
schema = perturbed-leader-experiment/1
horizon = 500
replicas = 8
seed = 13
theorems = thm6ii

[pool]
kind = uniform
n = 2

[predictor]
kind = fpl

[schedule]
kind = dynamic-Kt
K = auto

[environment]
kind = fl-killer
"""


def write(tmp_path, text, name="exp.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestConfig:
    def test_resolves_auto_K(self):
        cfg = parse_config(BASE)
        assert cfg.predictor.schedule.K == pytest.approx(0.6931, abs=1e-4)
        assert cfg.resolved["schema"] == "perturbed-leader-experiment/1"

    def test_schema_mismatch(self):
        with pytest.raises(ConfigError, match=r":2: \[experiment\] schema"):
            parse_config(BASE.replace("experiment/1", "experiment/0"), "exp.ini")

    def test_unknown_field_reports_line(self):
        with pytest.raises(ConfigError, match=r":11: \[pool\] colour"):
            parse_config(BASE.replace("n = 2", "n = 2\ncolour = red"), "exp.ini")

    def test_bad_number(self):
        with pytest.raises(ConfigError, match="horizon"):
            parse_config(BASE.replace("horizon = 500", "horizon = many"))

    def test_missing_section(self):
        with pytest.raises(ConfigError, match=r"\[environment\]"):
            parse_config(BASE.split("[environment]")[0])

    def test_theorem_schedule_mismatch(self):
        text = BASE.replace("theorems = thm6ii", "theorems = thm7ii").replace(
            "kind = dynamic-Kt", "kind = dynamic-t")
        with pytest.raises(ConfigError, match="thm7ii"):
            parse_config(text)

    def test_static_L_defaults_to_horizon(self):
        text = BASE.replace("theorems = thm6ii", "theorems = thm5ii").replace(
            "kind = dynamic-Kt", "kind = static-KL")
        assert parse_config(text).predictor.schedule.L == 500.0

    def test_overrides(self):
        cfg = parse_config(BASE, seed=99, replicas=3)
        assert cfg.seed == 99 and cfg.replicas == 3


class TestRun:
    def test_pass_and_outputs(self, tmp_path):
        out = tmp_path / "out"
        assert main(["--config", str(write(tmp_path, BASE)), "--out-dir", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["verdict"] == "pass"
        assert report["config"]["horizon"] == 500
        assert report["reports"][0]["theorem"] == "thm6ii"
        assert set(report["reports"][0]) >= {"lhs", "lhs_stderr", "rhs", "slack", "verdict", "config"}
        lines = (out / "trace.csv").read_text().splitlines()
        assert lines[0].startswith("# generated")
        assert lines[1] == "t,eta,decision,u_t,ell_t,cum_u,cum_best"
        assert len(lines) == 502

    def test_byte_identical_reruns(self, tmp_path):
        path = write(tmp_path, BASE)
        main(["--config", str(path), "--out-dir", str(tmp_path / "a")])
        main(["--config", str(path), "--out-dir", str(tmp_path / "b")])
        a, b = tmp_path / "a", tmp_path / "b"
        assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
        strip = lambda p: p.read_text().split("\n", 1)[1]  # noqa: E731
        assert strip(a / "trace.csv") == strip(b / "trace.csv")

    def test_failing_bound_exits_one(self, tmp_path, capsys):
        # swap in the unperturbed leader so the thm6ii bound genuinely fails
        text = BASE.replace("horizon = 500", "horizon = 2000")
        path = write(tmp_path, text)
        from perturbed_leader import cli

        cfg = cli.load_config(path)
        cfg.predictor.decide = lambda t, cum, eta, q: (cum + cfg.pool.complexities).argmin(axis=1)
        status, document = cli.run_experiment(cfg, tmp_path / "o")
        assert status == 1
        assert document["failures"][0]["theorem"] == "thm6ii"

    def test_config_error_exits_two(self, tmp_path, capsys):
        path = write(tmp_path, BASE.replace("n = 2", "n = zero"))
        assert main(["--config", str(path), "--out-dir", str(tmp_path)]) == 2
        assert "[pool] n" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["--config", str(tmp_path / "none.ini")]) == 2

    def test_env_var_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FPL_OUTPUT_DIR", str(tmp_path / "env"))
        assert main(["--config", str(write(tmp_path, BASE))]) == 0
        assert (tmp_path / "env" / "report.json").exists()

    def test_fixed_sequence_relative_path(self, tmp_path):
        (tmp_path / "seq.csv").write_text("\n".join(["0,1", "1,0"] * 10) + "\n")
        text = BASE.replace("kind = fl-killer", "kind = fixed\npath = seq.csv").replace(
            "horizon = 500", "horizon = 20")
        assert main(["--config", str(write(tmp_path, text)), "--out-dir", str(tmp_path / "o")]) == 0


class TestScenarios:
    def test_catalog(self):
        cat = list_scenarios()
        assert len(cat) >= 11
        assert len({c["name"] for c in cat}) == len(cat)
        assert all(c["citation"] for c in cat)

    def test_list_flag(self, capsys):
        assert main(["--list-scenarios"]) == 0
        assert len(json.loads(capsys.readouterr().out)) == len(SCENARIOS)

    def test_run_scenario(self, tmp_path):
        assert main(["--scenario", "fl-failure", "--out-dir", str(tmp_path)]) == 0
        assert json.loads((tmp_path / "fl-failure.json").read_text())["verdict"] == "pass"

    def test_exact_selftest_small(self, tmp_path):
        args = ["--scenario", "exact-probability-selftest", "--replicas", "20000",
                "--out-dir", str(tmp_path)]
        assert main(args) == 0
        metrics = json.loads((tmp_path / "exact-probability-selftest.json").read_text())["metrics"]
        assert abs(metrics["quadrature"][0] - metrics["subset_sum"][0]) <= 1e-9

    def test_unknown_scenario(self):
        assert main(["--scenario", "nope"]) == 2
