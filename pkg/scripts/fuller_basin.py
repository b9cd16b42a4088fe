"""Sampled basin check for the outward fixed point of the Fuller return map.

Runs the boundary, table and convergence checks and prints a histogram of
the number of return-map steps needed to reach q_out.
"""

import argparse
from collections import Counter

import numpy as np

from reinhardt import fuller


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--samples", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    report = fuller.basin_check(args.samples, args.seed)
    print(f"converged {report.converged}/{report.started}, "
          f"boundary escapes {report.boundary_escapes}/{report.boundary_samples}")
    for part, count in report.row_violations.items():
        print(f"  row {part:8s}: {count} violations on {report.row_samples[part]} samples")
    print(f"overall: {'ok' if report.ok else 'FAILED'}")

    starts = fuller.random_wall_states(args.samples, np.random.default_rng(args.seed + 1))
    steps = Counter(int(s) for s in fuller.converge_to_q_out(starts))
    print("steps to reach q_out:")
    for n in sorted(steps):
        print(f"  {n:3d}: {'#' * max(1, 60 * steps[n] // args.samples)} {steps[n]}")


if __name__ == "__main__":
    main()
