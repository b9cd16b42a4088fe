"""Areas and densities of the smoothed (6k+2)- and (6k-2)-gons.

The plus family increases towards the circle density; the last column is
the remaining gap.
"""

import argparse
from pathlib import Path

from reinhardt.export import write_csv
from reinhardt.extremals import CIRCLE_DENSITY, solve_polygon


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--k-max", type=int, default=20)
    parser.add_argument("--out", type=Path, default=Path("out/density"))
    args = parser.parse_args()

    rows = []
    print(f"{'n':>5} {'area':>18} {'density':>18} {'gap to circle':>14}")
    for k in range(1, args.k_max + 1):
        for family in ("plus", "minus"):
            p = solve_polygon(k, family)
            gap = CIRCLE_DENSITY - p.density
            rows.append((p.n_sides, family, k, p.area, p.density, gap))
            print(f"{p.n_sides:5d} {p.area:18.12f} {p.density:18.12f} {gap:14.3e}")
    path = write_csv(args.out / "density_trend.csv",
                     ["n", "family", "k", "area", "density", "gap"], rows)
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
