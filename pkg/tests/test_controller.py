"""Tests for argument parsing, subcommand dispatch and exit codes."""
import json
import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from steadyflow import controller
from steadyflow.errors import UsageError
from steadyflow.report import read_grid_csv


def _run(tmp_path, *argv):
    out = tmp_path / "report.json"
    code = controller.main([*argv, "--results-path", str(tmp_path), "--output", str(out),
                            "--no-timestamp"])
    report = json.loads(out.read_text(encoding="utf-8")) if out.exists() else None
    return code, report


class TestConfig:
    def test_no_command(self):
        """A bare command line is a usage error."""
        with pytest.raises(UsageError):
            controller.config([])

    def test_defaults(self):
        """Common flags get their defaults."""
        cfg = controller.config(["residual", "--field", "sinsin"])
        assert cfg.command == "residual"
        assert cfg.resolution == 256
        assert cfg.scheme == "exact"
        assert cfg.params == {}
        assert cfg.tolerances.steady_threshold == 1e-6

    def test_extra_flags_become_params(self):
        """Unknown --name value pairs are field parameters."""
        cfg = controller.config(["flux", "--field", "radial-poly", "--p", "2", "--cx=0.1"])
        assert cfg.params == {"p": "2", "cx": "0.1"}

    def test_param_flag(self):
        """--param KEY=VALUE is merged with the extra flags."""
        cfg = controller.config(["residual", "--field", "radial-poly", "--param", "p=3"])
        assert cfg.params == {"p": "3"}

    def test_bad_param_flag(self):
        """--param without '=' is refused."""
        with pytest.raises(UsageError):
            controller.config(["residual", "--field", "sinsin", "--param", "p"])

    def test_dangling_extra_flag(self):
        """A trailing extra flag with no value is refused."""
        with pytest.raises(UsageError):
            controller.config(["residual", "--field", "sinsin", "--p"])

    def test_tolerance_override(self):
        """--tolerance overrides one threshold for the run."""
        cfg = controller.config(["residual", "--field", "sinsin",
                                 "--tolerance", "steady_threshold=1e-3"])
        assert cfg.tolerances.steady_threshold == pytest.approx(1e-3)

    def test_endpoint_window_flag(self):
        """--endpoint-window feeds the tolerance set."""
        cfg = controller.config(["flux", "--field", "radial-poly", "--endpoint-window", "0.05"])
        assert cfg.tolerances.endpoint_window == pytest.approx(0.05)

    def test_unknown_choice(self):
        """Invalid choices raise instead of exiting."""
        with pytest.raises(UsageError):
            controller.config(["residual", "--field", "sinsin", "--scheme", "fd2"])


class TestResolveSpec:
    def test_catalog_id(self):
        """A bare id becomes a spec with no params."""
        assert controller.resolve_spec("sinsin").canonical() == "name=sinsin; params={}; domain={}"

    def test_params_are_typed(self):
        """Parameter overrides are parsed with the spec grammar."""
        spec = controller.resolve_spec("radial-poly", params={"p": "3"})
        assert spec.param_dict == {"p": 3}

    def test_spec_file(self, tmp_path):
        """A spec file is read as the full text form."""
        path = tmp_path / "field.spec"
        path.write_text("name=radial-poly; params={p:2}; domain={}", encoding="utf-8")
        assert controller.resolve_spec(spec_file=str(path)).param_dict == {"p": 2}

    def test_missing_spec_file(self, tmp_path):
        """A spec file that cannot be read is a usage error."""
        with pytest.raises(UsageError):
            controller.resolve_spec(spec_file=str(tmp_path / "absent.spec"))

    def test_missing_field(self):
        """Neither --field nor --spec is a usage error."""
        with pytest.raises(UsageError):
            controller.resolve_spec()


class TestSubcommands:
    def test_usage_exit_code(self, capsys):
        """Usage errors exit with 1."""
        assert controller.main([]) == 1
        assert "usage" in capsys.readouterr().out

    def test_missing_field_exit_code(self, tmp_path):
        """A subcommand without a field exits with 1."""
        code, _ = _run(tmp_path, "residual")
        assert code == 1

    def test_unknown_catalog_field(self, tmp_path):
        """Unknown catalog names are workbench errors."""
        code, _ = _run(tmp_path, "residual", "--field", "no-such-field")
        assert code == 1

    def test_residual_steady(self, tmp_path):
        """A steady catalog field exits 0 and embeds the report meta."""
        code, report = _run(tmp_path, "residual", "--field", "sinsin", "--resolution", "64")
        assert code == 0
        assert report["steady"] is True
        assert report["sup_residual"] <= 1e-9
        assert report["meta"]["spec"] == "name=sinsin; params={}; domain={}"
        assert report["meta"]["timestamp"] is None
        assert report["meta"]["tool"] == "steadyflow"

    def test_residual_non_steady(self, tmp_path):
        """A perturbed field exits 2."""
        code, report = _run(tmp_path, "residual", "--field", "perturbed-radial",
                            "--resolution", "64")
        assert code == 2
        assert report["steady"] is False

    def test_bracket_never_non_steady(self, tmp_path):
        """bracket reports norms and exits 0 even for a non-zero bracket."""
        code, report = _run(tmp_path, "bracket", "--field", "perturbed-radial",
                            "--resolution", "64")
        assert code == 0
        assert report["sup_residual"] > 1e-3

    def test_bracket_with_second_field(self, tmp_path):
        """{psi, psi} vanishes."""
        code, report = _run(tmp_path, "bracket", "--field", "sinsin", "--g", "sinsin",
                            "--resolution", "64")
        assert code == 0
        assert report["sup_residual"] <= 1e-12

    def test_param_passthrough(self, tmp_path):
        """--p reaches the catalog field and the canonical spec."""
        code, report = _run(tmp_path, "residual", "--field", "radial-poly", "--p", "3",
                            "--resolution", "64")
        assert code == 0
        assert report["meta"]["spec"].startswith("name=radial-poly; params={p:3}")

    def test_reruns_are_identical(self, tmp_path):
        """Without a timestamp two runs write the same bytes."""
        first = tmp_path / "a.json"
        second = tmp_path / "b.json"
        for out in (first, second):
            controller.main(["residual", "--field", "shear", "--resolution", "32",
                             "--results-path", str(tmp_path), "--output", str(out),
                             "--no-timestamp"])
        assert first.read_bytes() == second.read_bytes()

    def test_default_output_path(self, tmp_path):
        """Without --output the report lands in the results directory."""
        code = controller.main(["residual", "--field", "sinsin", "--resolution", "32",
                                "--results-path", str(tmp_path), "--no-timestamp"])
        assert code == 0
        assert (tmp_path / "residual.json").exists()

    def test_critical_set(self, tmp_path):
        """The critical-set report lists components and levels."""
        code, report = _run(tmp_path, "critical-set", "--field", "radial-poly", "--p", "2",
                            "--resolution", "128")
        assert code == 0
        kinds = sorted(c["kind"] for c in report["components"])
        assert kinds == ["isolated", "loop"]

    def test_flux(self, tmp_path):
        """flux on a radial field is single-valued and writes the sample table."""
        table = tmp_path / "samples.csv"
        code, report = _run(tmp_path, "flux", "--field", "radial-poly", "--p", "2",
                            "--table", str(table))
        assert code == 0
        assert report["verdict"] == "single-valued"
        assert report["residual"] <= 1e-6
        assert "relation" not in report
        assert len(report["puiseux"]) == 2
        assert table.exists()

    def test_solve_constant_flux(self, tmp_path):
        """solve with F = 1 writes a grid of the solution."""
        code, report = _run(tmp_path, "solve", "--flux", "1", "--resolution", "33")
        assert code == 0
        assert report["mode"] == "disk-newton"
        head, values = read_grid_csv(report["grid_csv"])
        assert values.shape == (head["ny"], head["nx"])

    def test_solve_needs_flux(self, tmp_path):
        """solve without any F is a usage error."""
        code, _ = _run(tmp_path, "solve")
        assert code == 1

    def test_missing_spec_file_exit_code(self, tmp_path):
        """--spec naming a missing file exits with 1."""
        code, _ = _run(tmp_path, "residual", "--spec", str(tmp_path / "absent.spec"))
        assert code == 1

    @pytest.mark.parametrize("text", ["s +", "exp(s) + t"])
    def test_solve_bad_flux_expression(self, tmp_path, text):
        """--flux must parse as an expression in s alone."""
        code, _ = _run(tmp_path, "solve", "--flux", text)
        assert code == 1

    def test_solve_bad_support(self, tmp_path):
        """--support needs two increasing numbers."""
        code, _ = _run(tmp_path, "solve", "--flux", "1", "--support", "1,0")
        assert code == 1

    def test_solve_radial_shoot_needs_center(self, tmp_path):
        """radial-shoot without --psi0 is a usage error."""
        code, _ = _run(tmp_path, "solve", "--flux", "1", "--mode", "radial-shoot")
        assert code == 1

    def test_moving_plane(self, tmp_path):
        """A radial field gets a radial verdict."""
        code, report = _run(tmp_path, "moving-plane", "--field", "radial-poly", "--p", "2",
                            "--directions", "16", "--lambdas", "32", "--resolution", "48")
        assert code == 0
        assert report["verdict"] == "radial"
        assert len(report["directions"]) == 16

    def test_counterexample(self, tmp_path):
        """counterexample writes the grid and the coefficient table."""
        code, report = _run(tmp_path, "counterexample", "--curve", "circle", "--delta", "0.2",
                            "--orders", "8,24", "--resolution", "32")
        assert code == 0
        assert report["orders"] == [8, 24]
        assert os.path.exists(report["grid_csv"])
        assert os.path.exists(report["coefficients_csv"])

    def test_counterexample_bad_orders(self, tmp_path):
        """--orders must be two integers."""
        code, _ = _run(tmp_path, "counterexample", "--orders", "16")
        assert code == 1

    def test_unknown_subcommand(self):
        """Dispatch refuses names outside the command set."""
        with pytest.raises(UsageError):
            controller.run_subcommand("render", None)


class TestAnalyze:
    def test_radial_semilinear(self, tmp_path):
        """A radial polynomial field is labelled radial and semilinear."""
        code, report = _run(tmp_path, "analyze", "--field", "radial-poly", "--p", "2",
                            "--directions", "8", "--sweep-resolution", "48")
        assert code == 0
        assert report["classification"] == ["radial", "semilinear"]
        assert report["steady"] is True

    def test_non_steady(self, tmp_path):
        """A non-steady field stops after the residual and exits 2."""
        code, report = _run(tmp_path, "analyze", "--field", "perturbed-radial",
                            "--resolution", "64")
        assert code == 2
        assert "flux" not in report
        assert report["steady"] is False
