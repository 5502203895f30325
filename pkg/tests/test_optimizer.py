import numpy as np
import pytest

from fmqa.annealer import AnnealConfig
from fmqa.blackbox import BlackBoxProblem, EvaluationError, make_problem
from fmqa.encoding import DiscretizationGrid
from fmqa.initdesign import DesignSpec
from fmqa.optimizer import (
    LoopConfig,
    RunRecord,
    aggregate,
    dedupe_perturb,
    derive_seed,
    random_search,
    run,
)
from fmqa.surrogate import TrainConfig, train

FAST_TRAIN = TrainConfig(epochs=8, batch_size=8)
FAST_ANNEAL = AnnealConfig(num_sweeps=60, num_restarts=4)


def trap_setup(n_vars=3, levels=4):
    problem = make_problem("trap", n_vars)
    grid = DiscretizationGrid(bounds=problem.bounds, levels=levels)
    return problem, grid


def fast_config(budget, n_samples, method="lhs", seed=0):
    return LoopConfig(
        budget=budget,
        design=DesignSpec(method=method, n_samples=n_samples, seed=seed),
        train=FAST_TRAIN,
        anneal=FAST_ANNEAL,
        factor_rank=3,
        seed=seed,
    )


class TestDeriveSeed:
    def test_deterministic(self):
        assert derive_seed(7, 1, 3) == derive_seed(7, 1, 3)

    def test_path_sensitive(self):
        seeds = {derive_seed(7), derive_seed(7, 0), derive_seed(7, 1), derive_seed(8, 0)}
        assert len(seeds) == 4

    def test_fits_uint32(self):
        s = derive_seed(123456789, 2, 57)
        assert 0 <= s < 2**32


class TestDedupePerturb:
    GRID = DiscretizationGrid(bounds=((0.0, 1.0), (0.0, 1.0)), levels=4)

    def test_fresh_point_unchanged_and_no_rng_use(self):
        rng = np.random.default_rng(0)
        state = rng.bit_generator.state
        out = dedupe_perturb(np.array([1, 2]), {(0, 0)}, self.GRID, rng)
        np.testing.assert_array_equal(out, [1, 2])
        assert rng.bit_generator.state == state

    def test_collision_walks_to_unvisited(self):
        rng = np.random.default_rng(1)
        evaluated = {(1, 2)}
        out = dedupe_perturb(np.array([1, 2]), evaluated, self.GRID, rng)
        assert tuple(out.tolist()) not in evaluated
        assert out.min() >= 0 and out.max() < 4

    def test_walk_survives_dense_history(self):
        # all but one point evaluated: the walk must find the lone gap
        grid = DiscretizationGrid(bounds=((0.0, 1.0), (0.0, 1.0)), levels=2)
        evaluated = {(0, 0), (0, 1), (1, 0)}
        out = dedupe_perturb(np.array([0, 0]), evaluated, grid, np.random.default_rng(3))
        assert tuple(out.tolist()) == (1, 1)

    def test_exhausted_grid_raises(self):
        grid = DiscretizationGrid(bounds=((0.0, 1.0),), levels=2)
        with pytest.raises(RuntimeError):
            dedupe_perturb(np.array([0]), {(0,), (1,)}, grid, np.random.default_rng(0))

    def test_binary_grid_must_jump(self):
        # levels=2: a +-1 step from (0,) that stays in range must land on (1,)
        grid = DiscretizationGrid(bounds=((0.0, 1.0),), levels=2)
        out = dedupe_perturb(np.array([0]), {(0,)}, grid, np.random.default_rng(4))
        assert out.tolist() == [1]


class TestRun:
    def test_spends_exact_budget_without_duplicates(self):
        problem, grid = trap_setup()
        record = run(problem, grid, fast_config(budget=12, n_samples=4))
        assert len(record.raw_values) == 12
        assert len(record.best_trajectory) == 12
        seen = {tuple(idx) for idx in record.eval_indices}
        assert len(seen) == 12

    def test_deterministic(self):
        problem, grid = trap_setup()
        a = run(problem, grid, fast_config(budget=10, n_samples=4, seed=5))
        b = run(problem, grid, fast_config(budget=10, n_samples=4, seed=5))
        assert a.raw_values == b.raw_values
        assert a.eval_indices == b.eval_indices
        assert a.config_hash == b.config_hash

    def test_seed_changes_outcome(self):
        problem, grid = trap_setup()
        a = run(problem, grid, fast_config(budget=10, n_samples=4, seed=0))
        b = run(problem, grid, fast_config(budget=10, n_samples=4, seed=1))
        assert a.raw_values != b.raw_values

    def test_trajectory_is_running_minimum(self):
        problem, grid = trap_setup()
        record = run(problem, grid, fast_config(budget=12, n_samples=4))
        np.testing.assert_allclose(
            record.best_trajectory, np.minimum.accumulate(record.raw_values)
        )

    def test_maximize_direction(self):
        problem = BlackBoxProblem(
            name="peak",
            n_vars=2,
            bounds=((0.0, 1.0), (0.0, 1.0)),
            direction="maximize",
            evaluator=lambda z: float(z.sum()),
        )
        grid = DiscretizationGrid(bounds=problem.bounds, levels=3)
        record = run(problem, grid, fast_config(budget=8, n_samples=3))
        np.testing.assert_allclose(
            record.best_trajectory, np.maximum.accumulate(record.raw_values)
        )
        np.testing.assert_allclose(record.targets_internal, -np.array(record.raw_values))

    @pytest.mark.filterwarnings("ignore:LHS with")
    def test_failed_evaluations_still_consume_budget(self):
        calls = {"n": 0}

        def flaky(z):
            calls["n"] += 1
            if calls["n"] % 3 == 0:
                raise EvaluationError("sensor glitch")
            return float(z.sum())

        problem = BlackBoxProblem(
            name="flaky",
            n_vars=2,
            bounds=((0.0, 1.0), (0.0, 1.0)),
            direction="minimize",
            evaluator=flaky,
        )
        grid = DiscretizationGrid(bounds=problem.bounds, levels=4)
        record = run(problem, grid, fast_config(budget=9, n_samples=3))
        assert len(record.raw_values) == 9
        assert sum(record.failed) == 3

    def test_snapshot_schedule_and_counts(self):
        problem, grid = trap_setup()
        record = run(problem, grid, fast_config(budget=10, n_samples=4))
        ks = [k for k, _ in record.snapshots]
        assert ks == list(range(1, 11))  # small problem: snapshot every eval
        final = np.array(record.snapshots[-1][1])
        assert final.shape == (grid.n_vars, grid.levels)
        # every evaluation activates one level per variable
        np.testing.assert_array_equal(final.sum(axis=1), [10, 10, 10])

    def test_recorded_params_reproduce_final_fit(self):
        problem, grid = trap_setup()
        config = fast_config(budget=8, n_samples=4, seed=3)
        record = run(problem, grid, config, record_params=True)
        snap = record.params_snapshot
        assert snap is not None

        from fmqa.encoding import encode
        from fmqa.surrogate import Dataset

        # the final fit sees every evaluation except the one it proposed
        n_train = record.budget - 1
        data = Dataset(grid.n_bits)
        for idx, y in zip(record.eval_indices[:n_train], record.targets_internal):
            data.append(encode(np.array(idx), grid), y)
        refit = train(
            data,
            config.train,
            config.factor_rank,
            rng=np.random.default_rng(derive_seed(config.seed, 1, snap["iteration"])),
        )
        np.testing.assert_array_equal(refit.linear, np.array(snap["linear"]))
        np.testing.assert_array_equal(refit.factors, np.array(snap["factors"]))

    def test_rejects_inconsistent_setup(self):
        problem, grid = trap_setup()
        with pytest.raises(ValueError):
            run(problem, DiscretizationGrid(bounds=((0.0, 1.0),), levels=4), fast_config(8, 4))
        bad_grid = DiscretizationGrid(
            bounds=((0.0, 2.0), (0.0, 1.0), (0.0, 1.0)), levels=4
        )
        with pytest.raises(ValueError):
            run(problem, bad_grid, fast_config(8, 4))

    def test_rejects_budget_beyond_grid(self):
        problem, grid = trap_setup(n_vars=2, levels=2)
        with pytest.raises(ValueError):
            run(problem, grid, fast_config(budget=5, n_samples=2))

    def test_budget_must_exceed_design(self):
        with pytest.raises(ValueError):
            fast_config(budget=4, n_samples=4)

    def test_json_round_trip(self, tmp_path):
        problem, grid = trap_setup()
        record = run(problem, grid, fast_config(budget=8, n_samples=4))
        path = tmp_path / "trial.json"
        record.save_json(path)
        loaded = RunRecord.load_json(path)
        assert loaded.raw_values == record.raw_values
        assert loaded.snapshots == record.snapshots
        assert loaded.config_hash == record.config_hash

    def test_trajectory_csv_format(self, tmp_path):
        problem, grid = trap_setup()
        record = run(problem, grid, fast_config(budget=8, n_samples=4))
        path = tmp_path / "trace.csv"
        record.save_trajectory_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "# n_init 4"
        assert lines[1] == "eval_index,raw_value,best_so_far"
        assert len(lines) == 2 + 8
        k, raw, best = lines[2].split(",")
        assert k == "1"
        assert float(raw) == record.raw_values[0]
        assert float(best) == record.best_trajectory[0]


class TestRandomSearch:
    def test_budget_and_monotonicity(self):
        problem, grid = trap_setup()
        record = random_search(problem, grid, budget=20, seed=3)
        assert len(record.raw_values) == 20
        np.testing.assert_allclose(
            record.best_trajectory, np.minimum.accumulate(record.raw_values)
        )

    def test_deterministic(self):
        problem, grid = trap_setup()
        a = random_search(problem, grid, budget=10, seed=8)
        b = random_search(problem, grid, budget=10, seed=8)
        assert a.raw_values == b.raw_values

    def test_duplicates_allowed(self):
        # tiny grid, big budget: iid draws must eventually repeat
        problem, grid = trap_setup(n_vars=1, levels=2)
        record = random_search(problem, grid, budget=20, seed=0)
        assert len({tuple(i) for i in record.eval_indices}) < 20

    def test_n_init_recorded_for_plotting(self):
        problem, grid = trap_setup()
        record = random_search(problem, grid, budget=10, seed=0, n_init=4)
        assert record.n_init == 4


class TestAggregate:
    @staticmethod
    def fake_record(label, trajectory, n_init=2, seed=0):
        return RunRecord(
            problem_name="toy",
            method_label=label,
            direction="minimize",
            n_init=n_init,
            budget=len(trajectory),
            seed=seed,
            config_hash="x",
            raw_values=list(trajectory),
            best_trajectory=list(trajectory),
            failed=[False] * len(trajectory),
            eval_indices=[[0]] * len(trajectory),
            targets_internal=list(trajectory),
            snapshots=[],
            timings={},
        )

    def test_hand_computed_statistics(self):
        records = [
            self.fake_record("m", [4.0, 2.0, 1.0], seed=0),
            self.fake_record("m", [6.0, 4.0, 3.0], seed=1),
        ]
        summary = aggregate(records)
        np.testing.assert_allclose(summary.mean_trajectory, [5.0, 3.0, 2.0])
        # population std at the final point: sqrt(mean((1-2)^2, (3-2)^2)) = 1
        assert summary.final_std == pytest.approx(1.0)
        assert summary.initial_mean == pytest.approx(3.0)  # anchor at n_init=2
        assert summary.gain == pytest.approx(2.0 - 3.0)

    def test_single_record(self):
        summary = aggregate([self.fake_record("m", [2.0, 1.0])])
        assert summary.n_records == 1
        assert summary.final_std == 0.0

    def test_rejects_mixed_shapes(self):
        with pytest.raises(ValueError):
            aggregate(
                [
                    self.fake_record("m", [1.0, 1.0]),
                    self.fake_record("other", [1.0, 1.0]),
                ]
            )

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            aggregate([])
