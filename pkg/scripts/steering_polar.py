"""Polar patterns of the second-order five-microphone design steered to 0, pi/3 and pi.

    python3 scripts/steering_polar.py --out runs/steering --freq 1000
"""

import argparse
import math
from pathlib import Path

import numpy as np

from ldma.beampattern import DesiredPattern, PolarGrid
from ldma.io import write_polar_csv, write_result
from ldma.optimizer import DesignProblem, solve


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("runs/steering"))
    parser.add_argument("--freq", type=float, default=1000.0)
    parser.add_argument("--grid-size", type=int, default=360)
    args = parser.parse_args()

    grid = PolarGrid(args.grid_size)
    for label, theta_d in (("0", 0.0), ("pi3", math.pi / 3), ("pi", math.pi)):
        problem = DesignProblem(5, DesiredPattern.from_preset(2, "max-DF", theta_d), args.freq)
        result = solve(problem)
        write_result(result, args.out / f"theta_{label}" / "result.json")
        path = write_polar_csv(result, grid, args.out / f"theta_{label}" / "polar.csv")
        rows = np.loadtxt(path, delimiter=",", skiprows=1)
        peaks = np.degrees(rows[rows[:, 3] >= rows[:, 3].max() * (1 - 1e-9), 0])
        print(f"theta_d={math.degrees(theta_d):6.1f} deg  peak at {np.round(peaks, 1).tolist()} deg  "
              f"MSE={result.metrics.pattern_mse:.3e}  -> {path}")


if __name__ == "__main__":
    main()
