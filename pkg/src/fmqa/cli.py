"""Command-line interface: experiment runner and report generators.

Subcommands:

* ``run`` — execute a YAML-described experiment (methods x trials), writing
  per-run records, per-method mean trajectories, and a summary CSV.
* ``coverage-report`` — turn run records into activation-bucket CSVs and
  stacked-area charts.
* ``plot`` — render mean-trajectory CSVs as an SVG line chart.
* ``solve-qubo`` — anneal (or brute-force) a QUBO from a coordinate file.

Exit codes: 0 success, 1 configuration/usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .annealer import AnnealConfig, brute_force_min, sample
from .blackbox import BlackBoxProblem, external_adapter, make_problem
from .encoding import DiscretizationGrid
from .initdesign import BUCKET_COLORS, BUCKET_LABELS, DesignSpec, activation_buckets
from .optimizer import (
    AggregateSummary,
    LoopConfig,
    RunRecord,
    aggregate,
    random_search,
    run,
)
from .qubo import load_coord
from .surrogate import TrainConfig
from .svgplot import line_plot, stacked_area

__all__ = ["main", "load_experiment", "ExperimentConfig", "MethodSpec"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


@dataclass(frozen=True)
class MethodSpec:
    """One table row of an experiment: a label plus how to optimize."""

    label: str
    algorithm: str = "fmqa"  # "fmqa" or "random_search"
    design_method: str = "uniform"
    n_samples: int = 0  # 0 means "unused" for random_search

    def __post_init__(self) -> None:
        if self.algorithm not in ("fmqa", "random_search"):
            raise ValueError(f"algorithm must be fmqa or random_search, got {self.algorithm!r}")
        if self.algorithm == "fmqa" and self.n_samples < 1:
            raise ValueError(f"method {self.label!r} needs design.n_samples >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed experiment file."""

    problem: BlackBoxProblem
    grid: DiscretizationGrid
    budget: int
    trials: int
    base_seed: int
    baseline: str
    out: str
    methods: tuple[MethodSpec, ...]
    train: TrainConfig
    anneal: AnnealConfig
    factor_rank: int


def _require(raw: dict, key: str):
    if key not in raw:
        raise ValueError(f"config is missing required key {key!r}")
    return raw[key]


def load_experiment(path: str | Path) -> ExperimentConfig:
    """Parse and validate a YAML experiment file (raises ValueError)."""
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ValueError("experiment config must be a mapping")

    n_vars = int(_require(raw, "n_vars"))
    levels = int(_require(raw, "levels"))
    budget = int(_require(raw, "budget"))
    spec = _require(raw, "problem")
    bounds_cfg = raw.get("bounds")

    if isinstance(spec, str):
        problem = make_problem(spec, n_vars)
    elif isinstance(spec, dict):
        if "command" not in spec:
            raise ValueError("external problem entry needs a 'command' key")
        if bounds_cfg is None:
            raise ValueError("external problems need explicit 'bounds'")
        problem = external_adapter(
            command=spec["command"],
            n_vars=n_vars,
            bounds=tuple((float(lo), float(hi)) for lo, hi in bounds_cfg),
            direction=spec.get("direction", "minimize"),
            timeout_ms=float(spec.get("timeout_ms", 10_000.0)),
            name=spec.get("name"),
        )
    else:
        raise ValueError("'problem' must be a name or a mapping with 'command'")

    bounds = (
        tuple((float(lo), float(hi)) for lo, hi in bounds_cfg)
        if bounds_cfg is not None
        else problem.bounds
    )
    grid = DiscretizationGrid(bounds=bounds, levels=levels)

    methods = []
    for entry in _require(raw, "methods"):
        if not isinstance(entry, dict) or "label" not in entry:
            raise ValueError("each method needs at least a 'label'")
        design = entry.get("design", {})
        methods.append(
            MethodSpec(
                label=str(entry["label"]),
                algorithm=entry.get("algorithm", "fmqa"),
                design_method=design.get("method", "uniform"),
                n_samples=int(design.get("n_samples", 0)),
            )
        )
    if not methods:
        raise ValueError("config needs at least one method")
    labels = [m.label for m in methods]
    if len(set(labels)) != len(labels):
        raise ValueError(f"method labels must be unique, got {labels}")

    baseline = raw.get("baseline", labels[0])
    if baseline not in labels:
        raise ValueError(f"baseline {baseline!r} is not one of the methods {labels}")

    try:
        train_cfg = TrainConfig(**raw.get("train", {}))
        anneal_cfg = AnnealConfig(**raw.get("anneal", {}))
    except TypeError as exc:
        raise ValueError(f"bad train/anneal settings: {exc}") from None

    return ExperimentConfig(
        problem=problem,
        grid=grid,
        budget=budget,
        trials=int(raw.get("trials", 1)),
        base_seed=int(raw.get("base_seed", 0)),
        baseline=baseline,
        out=str(raw.get("out", "runs/out")),
        methods=tuple(methods),
        train=train_cfg,
        anneal=anneal_cfg,
        factor_rank=int(raw.get("factor_rank", 5)),
    )


def _shared_n_init(cfg: ExperimentConfig) -> int:
    sizes = {m.n_samples for m in cfg.methods if m.algorithm == "fmqa"}
    return sizes.pop() if len(sizes) == 1 else 0


def _run_one(cfg: ExperimentConfig, method: MethodSpec, trial: int) -> RunRecord:
    seed = cfg.base_seed + trial  # paired seeds: shared across methods
    if method.algorithm == "random_search":
        return random_search(
            cfg.problem,
            cfg.grid,
            budget=cfg.budget,
            seed=seed,
            n_init=_shared_n_init(cfg),
            method_label=method.label,
        )
    loop = LoopConfig(
        budget=cfg.budget,
        design=DesignSpec(method=method.design_method, n_samples=method.n_samples, seed=seed),
        train=cfg.train,
        anneal=cfg.anneal,
        factor_rank=cfg.factor_rank,
        seed=seed,
    )
    return run(cfg.problem, cfg.grid, loop, method_label=method.label)


def _write_mean_trajectory(path: Path, summary: AggregateSummary) -> None:
    lines = [f"# n_init {summary.n_init}", "eval_index,mean_best,std_best"]
    for k in range(summary.budget):
        lines.append(
            f"{k + 1},{float(summary.mean_trajectory[k])!r},{float(summary.std_trajectory[k])!r}"
        )
    path.write_text("\n".join(lines) + "\n")


def _write_summary_csv(path: Path, summaries: list[AggregateSummary], baseline: str) -> None:
    base = next(s for s in summaries if s.method_label == baseline)
    lines = [
        "method,n_trials,initial_mean,initial_std,final_mean,final_std,gain,delta_vs_baseline"
    ]
    for s in summaries:
        delta = "" if s.method_label == baseline else repr(s.final_mean - base.final_mean)
        lines.append(
            f"{s.method_label},{s.n_records},{s.initial_mean!r},{s.initial_std!r},"
            f"{s.final_mean!r},{s.final_std!r},{s.gain!r},{delta}"
        )
    path.write_text("\n".join(lines) + "\n")


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = load_experiment(args.config)
        if args.seed is not None:
            cfg = ExperimentConfig(**{**cfg.__dict__, "base_seed": args.seed})
        if args.out is not None:
            cfg = ExperimentConfig(**{**cfg.__dict__, "out": args.out})
    except (OSError, ValueError, yaml.YAMLError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        jobs = [(m, t) for m in cfg.methods for t in range(cfg.trials)]
        if args.parallel > 1:
            with concurrent.futures.ThreadPoolExecutor(max_workers=args.parallel) as pool:
                futures = {
                    (m.label, t): pool.submit(_run_one, cfg, m, t) for m, t in jobs
                }
                records = {key: f.result() for key, f in futures.items()}
        else:
            records = {(m.label, t): _run_one(cfg, m, t) for m, t in jobs}

        summaries = []
        for m in cfg.methods:
            method_dir = out / m.label
            method_dir.mkdir(exist_ok=True)
            method_records = [records[(m.label, t)] for t in range(cfg.trials)]
            for t, rec in enumerate(method_records):
                rec.save_json(str(method_dir / f"trial_{t}.json"))
                rec.save_trajectory_csv(str(method_dir / f"trial_{t}_trajectory.csv"))
            summary = aggregate(method_records)
            summaries.append(summary)
            _write_mean_trajectory(out / f"trajectory_{m.label}.csv", summary)
        _write_summary_csv(out / "summary.csv", summaries, cfg.baseline)
    except Exception as exc:  # runtime failure, not config
        print(f"run failed: {exc}", file=sys.stderr)
        return 2

    print(f"problem {cfg.problem.name} ({cfg.problem.direction}), budget {cfg.budget}, "
          f"trials {cfg.trials}")
    header = f"{'method':<16}{'initial':>12}{'final':>12}{'gain':>12}  vs {cfg.baseline}"
    print(header)
    base = next(s for s in summaries if s.method_label == cfg.baseline)
    for s in summaries:
        delta = "" if s.method_label == cfg.baseline else f"{s.final_mean - base.final_mean:+.4g}"
        print(
            f"{s.method_label:<16}{s.initial_mean:>12.5g}{s.final_mean:>12.5g}"
            f"{s.gain:>12.5g}  {delta}"
        )
    print(f"artifacts in {out}")
    return 0


def _collect_records(paths: list[str]) -> list[RunRecord]:
    files: list[Path] = []
    for p in paths:
        path = Path(p)
        if path.is_dir():
            files.extend(sorted(path.rglob("trial_*.json")))
        else:
            files.append(path)
    if not files:
        raise ValueError(f"no run records found under {paths}")
    return [RunRecord.load_json(str(f)) for f in files]


def _cmd_coverage_report(args: argparse.Namespace) -> int:
    try:
        records = _collect_records(args.records)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        by_label: dict[str, list[RunRecord]] = {}
        for rec in records:
            by_label.setdefault(rec.method_label, []).append(rec)
        for label, recs in by_label.items():
            eval_indices = [k for k, _ in recs[0].snapshots]
            if any([k for k, _ in r.snapshots] != eval_indices for r in recs):
                raise ValueError(f"records for {label!r} have mismatched snapshot schedules")
            # bucket counts averaged across trials, one row per snapshot
            stacks = np.zeros((len(eval_indices), len(BUCKET_LABELS)))
            for r in recs:
                for row, (_, counts) in enumerate(r.snapshots):
                    stacks[row] += activation_buckets(np.array(counts))
            stacks /= len(recs)
            csv_path = out / f"coverage_{label}.csv"
            lines = [f"# buckets {','.join(BUCKET_LABELS)}",
                     "eval_index," + ",".join(f"bucket_{b}" for b in BUCKET_LABELS)]
            for k, row in zip(eval_indices, stacks):
                lines.append(f"{k}," + ",".join(repr(float(v)) for v in row))
            csv_path.write_text("\n".join(lines) + "\n")
            if args.format == "svg":
                stacked_area(
                    str(out / f"coverage_{label}.svg"),
                    [float(k) for k in eval_indices],
                    [(b, stacks[:, i].tolist()) for i, b in enumerate(BUCKET_LABELS)],
                    colors=BUCKET_COLORS,
                    title=f"activation counts: {label}",
                    xlabel="evaluations",
                    ylabel="bits per bucket",
                )
            final = ", ".join(
                f"{b}: {stacks[-1, i]:g}" for i, b in enumerate(BUCKET_LABELS)
            )
            print(f"{label}: final bucket means {final}")
    except Exception as exc:
        print(f"coverage report failed: {exc}", file=sys.stderr)
        return 2
    return 0


def _read_mean_trajectory(path: Path) -> tuple[str, int, list[float], list[float]]:
    label = path.stem
    if label.startswith("trajectory_"):
        label = label[len("trajectory_"):]
    n_init = 0
    xs: list[float] = []
    ys: list[float] = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            fields = line[1:].split()
            if len(fields) == 2 and fields[0] == "n_init":
                n_init = int(fields[1])
            continue
        if line.startswith("eval_index"):
            continue
        parts = line.split(",")
        xs.append(float(parts[0]))
        ys.append(float(parts[1]))
    if not xs:
        raise ValueError(f"{path}: no data rows")
    return label, n_init, xs, ys


def _cmd_plot(args: argparse.Namespace) -> int:
    try:
        parsed = [_read_mean_trajectory(Path(p)) for p in args.csvs]
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        out = args.out or ("trajectories.svg" if args.format == "svg" else "trajectories.csv")
        if args.format == "svg":
            boundary = max(n for _, n, _, _ in parsed)
            line_plot(
                out,
                [(label, xs, ys) for label, _, xs, ys in parsed],
                title="mean best-so-far",
                xlabel="evaluations",
                ylabel="objective",
                shade_to_x=boundary if boundary > 0 else None,
            )
        else:
            length = len(parsed[0][2])
            if any(len(xs) != length for _, _, xs, _ in parsed):
                raise ValueError("trajectory CSVs must share the same budget length")
            header = "eval_index," + ",".join(label for label, _, _, _ in parsed)
            lines = [header]
            for i in range(length):
                row = [f"{parsed[0][2][i]:g}"] + [repr(ys[i]) for _, _, _, ys in parsed]
                lines.append(",".join(row))
            Path(out).write_text("\n".join(lines) + "\n")
        print(f"wrote {out}")
    except Exception as exc:
        print(f"plot failed: {exc}", file=sys.stderr)
        return 2
    return 0


def _cmd_solve_qubo(args: argparse.Namespace) -> int:
    try:
        q = load_coord(args.file)
        if args.brute_force:
            bits, energy_val = brute_force_min(q)
            feasible = restarts = None
        else:
            cfg = AnnealConfig(
                num_sweeps=args.sweeps,
                num_restarts=args.restarts,
                seed=args.seed,
                time_budget_ms=args.time_budget_ms,
            )
            result = sample(q, cfg)
            bits, energy_val = result.best_bits, result.best_energy
            feasible, restarts = result.feasible, result.restarts_run
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    print("bits " + "".join(str(int(b)) for b in bits))
    print(f"energy {energy_val!r}")
    print(f"offset {q.offset!r}")
    print(f"total {energy_val + q.offset!r}")
    if feasible is not None:
        print(f"feasible {feasible}")
        print(f"restarts_run {restarts}")
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="fmqa", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a YAML config")
    p_run.add_argument("--config", required=True, help="experiment YAML file")
    p_run.add_argument("--out", default=None, help="output directory (overrides config)")
    p_run.add_argument("--parallel", type=int, default=1, help="worker threads for trials")
    p_run.add_argument("--seed", type=int, default=None, help="override base_seed")
    p_run.set_defaults(fn=_cmd_run)

    p_cov = sub.add_parser("coverage-report", help="activation-bucket report from run records")
    p_cov.add_argument("records", nargs="+", help="record JSON files or directories")
    p_cov.add_argument("--out", default=".", help="output directory")
    p_cov.add_argument("--format", choices=("svg", "csv"), default="svg",
                       help="svg writes charts and CSVs; csv writes CSVs only")
    p_cov.set_defaults(fn=_cmd_coverage_report)

    p_plot = sub.add_parser("plot", help="plot mean-trajectory CSVs")
    p_plot.add_argument("csvs", nargs="+", help="trajectory_<label>.csv files")
    p_plot.add_argument("--out", default=None, help="output file")
    p_plot.add_argument("--format", choices=("svg", "csv"), default="svg")
    p_plot.set_defaults(fn=_cmd_plot)

    p_solve = sub.add_parser("solve-qubo", help="minimize a QUBO coordinate file")
    p_solve.add_argument("file", help="coordinate text file")
    p_solve.add_argument("--seed", type=int, default=0)
    p_solve.add_argument("--sweeps", type=int, default=2000)
    p_solve.add_argument("--restarts", type=int, default=64)
    p_solve.add_argument("--time-budget-ms", type=float, default=None)
    p_solve.add_argument("--brute-force", action="store_true",
                         help="exact enumeration (<= 24 bits)")
    p_solve.set_defaults(fn=_cmd_solve_qubo)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
