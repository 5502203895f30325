#!/usr/bin/env python3
"""Never-active bit statistics for the three initial-design strategies.

For each design method, draws many seeded designs at the given shape and
reports the mean fraction of one-hot bits that no sample activates, next to
the closed-form expectation for iid uniform sampling.  Optionally writes a
stacked-area chart of activation buckets as the design grows.
"""
import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from fmqa.encoding import DiscretizationGrid, encode
from fmqa.initdesign import (
    BUCKET_COLORS,
    BUCKET_LABELS,
    DesignSpec,
    activation_buckets,
    coverage_counts,
    expected_uncovered,
    generate_design,
)
from fmqa.svgplot import stacked_area


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n-vars", type=int, default=17)
    parser.add_argument("--levels", type=int, default=32)
    parser.add_argument("--n-samples", type=int, default=32)
    parser.add_argument("--designs", type=int, default=500)
    parser.add_argument("--chart", default=None,
                        help="write an activation-bucket chart for this method "
                             "(uniform/lhs/sobol) as SVG")
    parser.add_argument("--out", default="coverage_buckets.svg")
    args = parser.parse_args(argv)

    grid = DiscretizationGrid(
        bounds=tuple((0.0, 1.0) for _ in range(args.n_vars)), levels=args.levels
    )
    p, expected_count = expected_uncovered(args.levels, args.n_samples, args.n_vars)
    print(f"iid-uniform expectation: fraction {p:.4f} "
          f"({expected_count:.1f} of {args.n_vars * args.levels} bits)")

    for method in ("uniform", "lhs", "sobol"):
        fractions = []
        for seed in range(args.designs):
            design = generate_design(
                DesignSpec(method=method, n_samples=args.n_samples, seed=seed), grid
            )
            rows = np.array([encode(idx, grid) for idx in design])
            fractions.append(coverage_counts(rows, grid).fraction_never_active)
        print(f"{method:<8} mean never-active fraction {np.mean(fractions):.4f} "
              f"(max {np.max(fractions):.4f}) over {args.designs} designs")

    if args.chart:
        design = generate_design(
            DesignSpec(method=args.chart, n_samples=args.n_samples, seed=0), grid
        )
        rows = np.array([encode(idx, grid) for idx in design])
        xs, layers = [], [[] for _ in BUCKET_LABELS]
        for k in range(1, len(rows) + 1):
            buckets = activation_buckets(coverage_counts(rows[:k], grid).counts)
            xs.append(float(k))
            for i, v in enumerate(buckets):
                layers[i].append(float(v))
        stacked_area(
            args.out,
            xs,
            list(zip(BUCKET_LABELS, layers)),
            colors=BUCKET_COLORS,
            title=f"activation buckets: {args.chart}",
            xlabel="samples",
            ylabel="bits per bucket",
        )
        print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
