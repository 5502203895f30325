import textwrap
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from fmqa.annealer import AnnealConfig, sample
from fmqa.cli import load_experiment, main
from fmqa.qubo import QuboMatrix, load_coord, save_coord

BASE_CONFIG = textwrap.dedent(
    """
    problem: trap
    n_vars: 2
    levels: 4
    budget: 8
    trials: 2
    base_seed: 7
    baseline: random
    factor_rank: 3
    train: {epochs: 8, batch_size: 8}
    anneal: {num_sweeps: 60, num_restarts: 4}
    methods:
      - label: uniform
        design: {method: uniform, n_samples: 4}
      - label: lhs
        design: {method: lhs, n_samples: 4}
      - label: random
        algorithm: random_search
    """
)


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "experiment.yaml"
    path.write_text(BASE_CONFIG + f"out: {tmp_path / 'out'}\n")
    return path


def read_summary(out_dir):
    lines = (out_dir / "summary.csv").read_text().splitlines()
    header = lines[0].split(",")
    rows = {parts[0]: dict(zip(header, parts)) for parts in (l.split(",") for l in lines[1:])}
    return header, rows


class TestLoadExperiment:
    def test_round_trips_fields(self, config_file):
        cfg = load_experiment(config_file)
        assert cfg.problem.name == "trap"
        assert cfg.grid.n_vars == 2 and cfg.grid.levels == 4
        assert cfg.budget == 8 and cfg.trials == 2
        assert [m.label for m in cfg.methods] == ["uniform", "lhs", "random"]
        assert cfg.methods[2].algorithm == "random_search"
        assert cfg.train.epochs == 8
        assert cfg.anneal.num_sweeps == 60

    def test_missing_key_rejected(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("problem: trap\nlevels: 4\nbudget: 8\nmethods: [{label: a}]\n")
        with pytest.raises(ValueError, match="n_vars"):
            load_experiment(path)

    def test_duplicate_labels_rejected(self, tmp_path):
        path = tmp_path / "dup.yaml"
        path.write_text(
            "problem: trap\nn_vars: 2\nlevels: 4\nbudget: 8\n"
            "methods: [{label: a, design: {n_samples: 4}}, {label: a, design: {n_samples: 4}}]\n"
        )
        with pytest.raises(ValueError, match="unique"):
            load_experiment(path)

    def test_unknown_train_key_rejected(self, tmp_path):
        path = tmp_path / "bad_train.yaml"
        path.write_text(
            "problem: trap\nn_vars: 2\nlevels: 4\nbudget: 8\n"
            "train: {learning_rte: 0.1}\nmethods: [{label: a, design: {n_samples: 4}}]\n"
        )
        with pytest.raises(ValueError, match="train/anneal"):
            load_experiment(path)

    def test_external_problem_requires_bounds(self, tmp_path):
        path = tmp_path / "ext.yaml"
        path.write_text(
            "problem: {command: ./sim.sh}\nn_vars: 2\nlevels: 4\nbudget: 8\n"
            "methods: [{label: a, design: {n_samples: 4}}]\n"
        )
        with pytest.raises(ValueError, match="bounds"):
            load_experiment(path)


class TestRunCommand:
    def test_writes_all_artifacts(self, config_file, tmp_path, capsys):
        assert main(["run", "--config", str(config_file)]) == 0
        out = tmp_path / "out"
        for label in ("uniform", "lhs", "random"):
            for t in range(2):
                assert (out / label / f"trial_{t}.json").exists()
                assert (out / label / f"trial_{t}_trajectory.csv").exists()
            assert (out / f"trajectory_{label}.csv").exists()
        header, rows = read_summary(out)
        assert header == [
            "method", "n_trials", "initial_mean", "initial_std",
            "final_mean", "final_std", "gain", "delta_vs_baseline",
        ]
        assert set(rows) == {"uniform", "lhs", "random"}
        assert rows["random"]["delta_vs_baseline"] == ""
        assert rows["uniform"]["delta_vs_baseline"] != ""
        captured = capsys.readouterr()
        assert "trap" in captured.out and "artifacts" in captured.out

    def test_summary_agrees_with_mean_trajectory(self, config_file, tmp_path):
        main(["run", "--config", str(config_file)])
        out = tmp_path / "out"
        _, rows = read_summary(out)
        lines = (out / "trajectory_uniform.csv").read_text().splitlines()
        assert lines[0] == "# n_init 4"
        data = [l.split(",") for l in lines[2:]]
        means = [float(parts[1]) for parts in data]
        assert float(rows["uniform"]["final_mean"]) == means[-1]
        assert float(rows["uniform"]["initial_mean"]) == means[3]  # anchor at n_init
        gain = float(rows["uniform"]["gain"])
        assert gain == pytest.approx(means[-1] - means[3], abs=1e-15)

    def test_rerun_is_byte_identical(self, config_file, tmp_path):
        main(["run", "--config", str(config_file), "--out", str(tmp_path / "a")])
        main(["run", "--config", str(config_file), "--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "summary.csv").read_bytes() == (
            tmp_path / "b" / "summary.csv"
        ).read_bytes()

    def test_parallel_matches_sequential(self, config_file, tmp_path):
        main(["run", "--config", str(config_file), "--out", str(tmp_path / "seq")])
        main(
            ["run", "--config", str(config_file), "--out", str(tmp_path / "par"),
             "--parallel", "4"]
        )
        assert (tmp_path / "seq" / "summary.csv").read_bytes() == (
            tmp_path / "par" / "summary.csv"
        ).read_bytes()

    def test_seed_override_changes_results(self, config_file, tmp_path):
        main(["run", "--config", str(config_file), "--out", str(tmp_path / "a")])
        main(["run", "--config", str(config_file), "--out", str(tmp_path / "b"),
              "--seed", "123"])
        assert (tmp_path / "a" / "summary.csv").read_text() != (
            tmp_path / "b" / "summary.csv"
        ).read_text()

    def test_missing_config_exits_1(self, tmp_path, capsys):
        assert main(["run", "--config", str(tmp_path / "nope.yaml")]) == 1
        assert "config error" in capsys.readouterr().err

    def test_invalid_yaml_exits_1(self, tmp_path, capsys):
        path = tmp_path / "broken.yaml"
        path.write_text("methods: [unbalanced\n")
        assert main(["run", "--config", str(path)]) == 1

    def test_usage_error_exits_1(self, capsys):
        assert main(["run"]) == 1  # --config is required
        assert "usage error" in capsys.readouterr().err

    def test_unknown_subcommand_exits_1(self, capsys):
        assert main(["frobnicate"]) == 1


class TestCoverageReportCommand:
    def test_writes_csv_and_svg(self, config_file, tmp_path, capsys):
        main(["run", "--config", str(config_file)])
        out = tmp_path / "out"
        report_dir = tmp_path / "report"
        assert main(["coverage-report", str(out / "lhs"), "--out", str(report_dir)]) == 0
        csv_path = report_dir / "coverage_lhs.csv"
        svg_path = report_dir / "coverage_lhs.svg"
        assert csv_path.exists() and svg_path.exists()
        ET.fromstring(svg_path.read_text())  # well-formed XML
        assert "lhs" in capsys.readouterr().out

        lines = csv_path.read_text().splitlines()
        assert lines[1] == "eval_index,bucket_0,bucket_1,bucket_2-9,bucket_10+"
        rows = [l.split(",") for l in lines[2:]]
        # bucket means sum to the bit count at every snapshot
        for parts in rows:
            assert sum(float(v) for v in parts[1:]) == pytest.approx(8.0)
        # LHS with n_samples == levels leaves no bit inactive at the design end
        design_row = next(parts for parts in rows if parts[0] == "4")
        assert float(design_row[1]) == 0.0

    def test_csv_only_format(self, config_file, tmp_path):
        main(["run", "--config", str(config_file)])
        report_dir = tmp_path / "csvonly"
        main(["coverage-report", str(tmp_path / "out" / "uniform"), "--out",
              str(report_dir), "--format", "csv"])
        assert (report_dir / "coverage_uniform.csv").exists()
        assert not (report_dir / "coverage_uniform.svg").exists()

    def test_missing_records_exit_1(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert main(["coverage-report", str(empty)]) == 1


class TestPlotCommand:
    def test_svg_output(self, config_file, tmp_path):
        main(["run", "--config", str(config_file)])
        out = tmp_path / "out"
        svg = tmp_path / "curves.svg"
        code = main(
            ["plot", str(out / "trajectory_uniform.csv"), str(out / "trajectory_lhs.csv"),
             str(out / "trajectory_random.csv"), "--out", str(svg)]
        )
        assert code == 0
        root = ET.fromstring(svg.read_text())
        ns = {"s": "http://www.w3.org/2000/svg"}
        polylines = root.findall(".//s:polyline", ns)
        assert len(polylines) == 3
        shade = [r for r in root.findall(".//s:rect", ns) if "data-boundary-x" in r.attrib]
        assert len(shade) == 1
        assert shade[0].attrib["data-boundary-x"] == "4"

    def test_csv_merge(self, config_file, tmp_path):
        main(["run", "--config", str(config_file)])
        out = tmp_path / "out"
        merged = tmp_path / "merged.csv"
        main(
            ["plot", str(out / "trajectory_uniform.csv"), str(out / "trajectory_lhs.csv"),
             "--out", str(merged), "--format", "csv"]
        )
        lines = merged.read_text().splitlines()
        assert lines[0] == "eval_index,uniform,lhs"
        assert len(lines) == 1 + 8

    def test_missing_file_exits_1(self, tmp_path, capsys):
        assert main(["plot", str(tmp_path / "nope.csv")]) == 1


class TestSolveQuboCommand:
    @pytest.fixture
    def qubo_file(self, tmp_path):
        rng = np.random.default_rng(211)
        q = QuboMatrix(np.triu(rng.normal(size=(10, 10))), offset=0.75)
        path = tmp_path / "model.qubo"
        save_coord(q, path)
        return path

    def parse(self, text):
        fields = {}
        for line in text.splitlines():
            key, _, value = line.partition(" ")
            fields[key] = value
        return fields

    def test_sample_output(self, qubo_file, capsys):
        assert main(["solve-qubo", str(qubo_file), "--seed", "3"]) == 0
        fields = self.parse(capsys.readouterr().out)
        assert set(fields["bits"]) <= {"0", "1"} and len(fields["bits"]) == 10
        assert float(fields["total"]) == pytest.approx(float(fields["energy"]) + 0.75)
        assert fields["feasible"] == "True"
        assert int(fields["restarts_run"]) == 64

    def test_matches_library_sampler(self, qubo_file, capsys):
        main(["solve-qubo", str(qubo_file), "--seed", "3", "--sweeps", "100",
              "--restarts", "8"])
        fields = self.parse(capsys.readouterr().out)
        q = load_coord(qubo_file)
        res = sample(q, AnnealConfig(num_sweeps=100, num_restarts=8, seed=3))
        assert fields["bits"] == "".join(str(int(b)) for b in res.best_bits)
        assert float(fields["energy"]) == res.best_energy

    def test_brute_force_agrees(self, qubo_file, capsys):
        main(["solve-qubo", str(qubo_file), "--brute-force"])
        brute = self.parse(capsys.readouterr().out)
        main(["solve-qubo", str(qubo_file)])
        sampled = self.parse(capsys.readouterr().out)
        assert float(sampled["energy"]) >= float(brute["energy"]) - 1e-12
        assert "feasible" not in brute

    def test_deterministic_stdout(self, qubo_file, capsys):
        main(["solve-qubo", str(qubo_file), "--seed", "5"])
        first = capsys.readouterr().out
        main(["solve-qubo", str(qubo_file), "--seed", "5"])
        assert capsys.readouterr().out == first

    def test_missing_file_exits_1(self, tmp_path, capsys):
        assert main(["solve-qubo", str(tmp_path / "ghost.qubo")]) == 1

    def test_brute_force_cap_exits_1(self, tmp_path, capsys):
        q = QuboMatrix(np.zeros((25, 25)))
        path = tmp_path / "big.qubo"
        save_coord(q, path)
        assert main(["solve-qubo", str(path), "--brute-force"]) == 1
