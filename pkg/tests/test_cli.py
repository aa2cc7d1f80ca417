import csv
import json

import numpy as np
import pytest
import yaml

from gridmix import MixtureModelSpec, KernelSpec, simulate
from gridmix.cli import main, parse_grid


@pytest.fixture()
def poisson_data_file(tmp_path):
    model = MixtureModelSpec(KernelSpec.poisson(), (2.0,), (1.0,))
    obs = simulate(model, 80, seed=2)
    path = tmp_path / "data.txt"
    path.write_text("\n".join(str(int(v)) for v in obs) + "\n")
    return path


class TestParseGrid:
    def test_equispaced(self):
        grid = parse_grid("0:20:101")
        assert grid.size == 101
        assert grid.axis1[0] == 0.0 and grid.axis1[-1] == 20.0

    def test_explicit_values(self):
        grid = parse_grid("1.0,2.5,9")
        assert grid.axis1 == (1.0, 2.5, 9.0)

    def test_two_axes(self):
        grid = parse_grid("-2:2:40x0.1:4.0:25")
        assert grid.shape == (40, 25)

    def test_bad_spec(self):
        with pytest.raises(ValueError):
            parse_grid("1:2")


class TestFitCommand:
    def test_fit_writes_json(self, poisson_data_file, tmp_path, capsys):
        out = tmp_path / "fit.json"
        code = main(
            [
                "fit",
                "--data", str(poisson_data_file),
                "--kernel", "poisson",
                "--grid", "1:5:5",
                "--rho", "0.2",
                "--perms", "8",
                "--iters", "120",
                "--seed", "3",
                "--out", str(out),
            ]
        )
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["support"] == [2.0]
        assert payload["size"] == 1
        assert payload["weights"] == [1.0]
        assert payload["config"]["rho"] == 0.2
        assert payload["seconds"] > 0

    def test_penalty_flag_required(self, poisson_data_file, capsys):
        code = main(
            ["fit", "--data", str(poisson_data_file), "--kernel", "poisson", "--grid", "1:5:5"]
        )
        assert code != 0
        err_lines = capsys.readouterr().err.strip().splitlines()
        assert json.loads(err_lines[-1])["type"] == "UsageError"

    def test_no_penalty_accepted(self, poisson_data_file, capsys):
        code = main(
            [
                "fit",
                "--data", str(poisson_data_file),
                "--kernel", "poisson",
                "--grid", "1:5:5",
                "--no-penalty",
                "--perms", "5",
                "--iters", "60",
            ]
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["config"]["rho"] is None

    def test_density_and_trace_emission(self, poisson_data_file, tmp_path):
        dens = tmp_path / "dens.csv"
        trace = tmp_path / "trace.csv"
        code = main(
            [
                "fit",
                "--data", str(poisson_data_file),
                "--kernel", "poisson",
                "--grid", "1:5:5",
                "--rho", "0.2",
                "--perms", "5",
                "--iters", "60",
                "--out", str(tmp_path / "f.json"),
                "--emit-density", str(dens),
                "--emit-trace", str(trace),
            ]
        )
        assert code == 0
        with open(dens) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["y", "density"]
        with open(trace) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["iteration", "objective", "support_size", "accepted"]
        assert len(rows) == 62

    def test_missing_file_is_json_error(self, capsys, tmp_path):
        code = main(
            [
                "fit",
                "--data", str(tmp_path / "nope.txt"),
                "--kernel", "poisson",
                "--grid", "1:5:5",
                "--no-penalty",
            ]
        )
        assert code == 1
        err = json.loads(capsys.readouterr().err)
        assert "error" in err


class TestSimulateCommand:
    def test_simulate_roundtrip(self, tmp_path, capsys):
        model_path = tmp_path / "model.yaml"
        model_path.write_text(
            yaml.safe_dump(
                {
                    "kernel": "poisson",
                    "components": [
                        {"value": 1.0, "weight": 0.5},
                        {"value": 9.0, "weight": 0.5},
                    ],
                }
            )
        )
        out = tmp_path / "sim.txt"
        code = main(
            ["simulate", "--model", str(model_path), "--n", "200", "--seed", "5", "--out", str(out)]
        )
        assert code == 0
        values = [float(v) for v in out.read_text().split()]
        assert len(values) == 200
        assert 3.0 < np.mean(values) < 7.0


class TestExperimentCommand:
    def test_experiment_runs(self, tmp_path, capsys):
        spec_path = tmp_path / "exp.yaml"
        spec_path.write_text(
            yaml.safe_dump(
                {
                    "model": {
                        "kernel": "poisson",
                        "components": [{"value": 2.0, "weight": 1.0}],
                    },
                    "n": 50,
                    "replications": 2,
                    "grid": {"lo": 1.0, "hi": 4.0, "count": 4},
                    "recursion": {"permutations": 5},
                    "anneal": {"iterations": 60, "rho": 0.25},
                    "seed": 1,
                }
            )
        )
        table_path = tmp_path / "table.csv"
        code = main(["experiment", "--spec", str(spec_path), "--out-table", str(table_path)])
        assert code == 0
        with open(table_path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["size", "proportion", "count"]
        total = sum(float(r[1]) for r in rows[1:])
        assert total == pytest.approx(1.0, abs=1e-9)
        assert "replications: 2" in capsys.readouterr().out


class TestOracleCommand:
    def test_sequential_imputation_output(self, poisson_data_file, capsys):
        code = main(
            [
                "oracle",
                "--data", str(poisson_data_file),
                "--support", "1.0,2.0,3.0",
                "--kernel", "poisson",
                "--paths", "500",
                "--seed", "2",
            ]
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["method"] == "sequential-imputation"
        assert np.isfinite(payload["log_marginal"])
        assert payload["standard_error"] >= 0

    def test_exact_small_case(self, tmp_path, capsys):
        path = tmp_path / "tiny.txt"
        path.write_text("1\n9\n")
        code = main(
            [
                "oracle",
                "--data", str(path),
                "--support", "1.0,9.0",
                "--kernel", "poisson",
                "--alpha0", "1.0",
                "--exact",
            ]
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["method"] == "exact"
        assert payload["log_marginal"] == pytest.approx(-5.0972082091547864, rel=1e-12)

    def test_guard_reported_as_error(self, poisson_data_file, capsys):
        code = main(
            [
                "oracle",
                "--data", str(poisson_data_file),
                "--support", "1.0,2.0",
                "--exact",
            ]
        )
        assert code == 1
        err = json.loads(capsys.readouterr().err)
        assert "error" in err
