"""Trace the unstable curve of the blown-up fixed point to the star boundary.

Writes the curve samples to CSV and a picture of the curve against the
boundary xt21 = sqrt(3) - 1/r.
"""

import argparse
import math
from pathlib import Path

import numpy as np

from reinhardt import blowup
from reinhardt.export import SvgPlot, write_csv


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--max-r", type=float, default=0.25)
    parser.add_argument("--step", type=float, default=5e-4)
    parser.add_argument("--out", type=Path, default=Path("out/unstable"))
    args = parser.parse_args()

    curve = blowup.unstable_curve(args.max_r, args.step)
    r_hit, xt_hit = curve.boundary_hit
    print(f"x_out = {np.array2string(blowup.X_OUT, precision=8)}")
    print(f"{len(curve.points)} samples; exits before switching from r = {curve.exit_onset:.5f}")
    print(f"meets the star boundary at (r, xt21) = ({r_hit:.5f}, {xt_hit:.5f})")
    print(f"smallest competing switching value {curve.other_switch_min:.4f} (positive: cyclic order)")

    write_csv(args.out / "unstable_curve.csv", ["r", "xt21", "lt11", "lt21"], curve.points)
    radii = np.linspace(0.17, r_hit + 0.02, 100)
    boundary = np.column_stack([radii, math.sqrt(3) - 1 / radii])
    SvgPlot("unstable curve", equal_aspect=False).line(curve.points[:, :2]).line(
        boundary, "#d62728").save(args.out / "unstable_curve.svg")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
