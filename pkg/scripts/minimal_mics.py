"""Third-order max-DF design with the minimum of four microphones at 1 kHz.

For each look direction, prints the pattern error next to the error floor
set by the part of the target that is odd in theta: a linear array's
response depends only on cos(theta), so it cannot reproduce that part.

    python3 scripts/minimal_mics.py --out runs/minimal
"""

import argparse
import math
from pathlib import Path

import numpy as np

from ldma.beampattern import DesiredPattern, PolarGrid, desired_on_grid
from ldma.io import write_polar_csv, write_result
from ldma.optimizer import DesignProblem, solve


def odd_part_floor(desired, grid=PolarGrid(3600)):
    target = desired_on_grid(desired, grid)
    mirrored = target[-np.arange(grid.size) % grid.size]
    return float(np.mean(np.abs(target - mirrored) ** 2) / 4)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("runs/minimal_mics"))
    parser.add_argument("--order", type=int, default=3)
    parser.add_argument("--restarts", type=int, default=8)
    args = parser.parse_args()

    for label, theta_d in (("0", 0.0), ("pi3", math.pi / 3), ("pi", math.pi)):
        desired = DesiredPattern.from_preset(args.order, "max-DF", theta_d)
        problem = DesignProblem(args.order + 1, desired, 1000.0, restarts=args.restarts)
        result = solve(problem)
        write_result(result, args.out / f"theta_{label}" / "result.json")
        write_polar_csv(result, PolarGrid(360), args.out / f"theta_{label}" / "polar.csv")
        m = result.metrics
        print(f"theta_d={theta_d:.4f}  converged={result.converged}  MSE={m.pattern_mse:.3e}  "
              f"floor={odd_part_floor(desired):.3e}  DF={m.directivity_factor:.4f}/{m.df_desired:.4f}")


if __name__ == "__main__":
    main()
