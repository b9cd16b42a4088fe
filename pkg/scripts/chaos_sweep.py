"""Compare nearby hyperboloid trajectories at two angular momenta.

For each level the script integrates two starts that differ by a small
relative perturbation and prints how far |w| drifts apart over time.
"""

import argparse

import numpy as np

from reinhardt.hyperboloid import chaos_sweep


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--t-max", type=float, default=40.0)
    parser.add_argument("--samples", type=int, default=2001)
    parser.add_argument("--levels", type=float, nargs="+", default=[2.5, 3.0])
    args = parser.parse_args()

    for a0 in args.levels:
        run = chaos_sweep(a0, t_max=args.t_max, n_samples=args.samples)
        print(f"A0 = {a0}: stop reason {run.stop_reason}")
        for t_cut in sorted({5.0, 10.0, 20.0, args.t_max}):
            mask = run.times <= t_cut
            if mask.any():
                print(f"  max divergence up to t = {t_cut:5.1f}: {np.max(run.divergence[mask]):.5f}")


if __name__ == "__main__":
    main()
