#!/usr/bin/env python3
"""Compare initial-design strategies for the surrogate loop on one problem.

Runs uniform/LHS/Sobol seeded trials plus a random-search baseline with
paired seeds, then writes per-method records, mean trajectories, a summary
CSV and a best-so-far plot into the output directory.

Example:
    python3 scripts/run_benchmark.py --problem trap --n-vars 5 --levels 8 \
        --budget 100 --trials 10 --out runs/trap5
"""
import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from fmqa.annealer import AnnealConfig
from fmqa.blackbox import make_problem
from fmqa.cli import _write_mean_trajectory, _write_summary_csv
from fmqa.encoding import DiscretizationGrid
from fmqa.initdesign import DesignSpec
from fmqa.optimizer import LoopConfig, aggregate, random_search, run
from fmqa.surrogate import TrainConfig
from fmqa.svgplot import line_plot


def parse_args(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--problem", default="trap",
                        choices=("sphere", "ellipsoid", "rastrigin", "trap"))
    parser.add_argument("--n-vars", type=int, default=5)
    parser.add_argument("--levels", type=int, default=8)
    parser.add_argument("--budget", type=int, default=100)
    parser.add_argument("--n-init", type=int, default=None,
                        help="initial design size (default: levels)")
    parser.add_argument("--trials", type=int, default=10)
    parser.add_argument("--base-seed", type=int, default=0)
    parser.add_argument("--epochs", type=int, default=500)
    parser.add_argument("--sweeps", type=int, default=1000)
    parser.add_argument("--restarts", type=int, default=32)
    parser.add_argument("--out", default="runs/benchmark")
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    n_init = args.n_init if args.n_init is not None else args.levels
    problem = make_problem(args.problem, args.n_vars)
    grid = DiscretizationGrid(bounds=problem.bounds, levels=args.levels)
    train_cfg = TrainConfig(epochs=args.epochs)
    anneal_cfg = AnnealConfig(num_sweeps=args.sweeps, num_restarts=args.restarts)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summaries = []
    series = []
    for method in ("uniform", "lhs", "sobol", "random"):
        t0 = time.perf_counter()
        records = []
        for trial in range(args.trials):
            seed = args.base_seed + trial
            if method == "random":
                rec = random_search(problem, grid, budget=args.budget, seed=seed,
                                    n_init=n_init, method_label="random")
            else:
                rec = run(
                    problem,
                    grid,
                    LoopConfig(
                        budget=args.budget,
                        design=DesignSpec(method=method, n_samples=n_init, seed=seed),
                        train=train_cfg,
                        anneal=anneal_cfg,
                        seed=seed,
                    ),
                    method_label=method,
                )
            records.append(rec)
        method_dir = out / method
        method_dir.mkdir(exist_ok=True)
        for t, rec in enumerate(records):
            rec.save_json(str(method_dir / f"trial_{t}.json"))
        summary = aggregate(records)
        summaries.append(summary)
        _write_mean_trajectory(out / f"trajectory_{method}.csv", summary)
        series.append((method, [float(k + 1) for k in range(args.budget)],
                       summary.mean_trajectory.tolist()))
        print(f"{method:<8} final mean {summary.final_mean:.5f} "
              f"(std {summary.final_std:.5f})  [{time.perf_counter() - t0:.1f}s]")

    _write_summary_csv(out / "summary.csv", summaries, baseline="random")
    line_plot(
        str(out / "trajectories.svg"),
        series,
        title=f"{problem.name} n={args.n_vars} M={args.levels}",
        xlabel="evaluations",
        ylabel="best objective",
        shade_to_x=float(n_init),
    )
    print(f"artifacts in {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
