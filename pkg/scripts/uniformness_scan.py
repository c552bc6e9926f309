"""Per-θ Fisher ratio of SLD-basis measurements on a family.

For a few reference points θ₀ the SLD eigenbasis at θ₀ is evaluated over the
whole grid; ratios below 1 mark where that measurement stops being optimal.
Output is CSV on stdout (theta0, theta, ratio).

    python scripts/uniformness_scan.py piecewise_xyz --count 49
"""

import argparse
import csv
import sys

import numpy as np

from qfi_broadcast.errors import DivergentFisher
from qfi_broadcast.families import BUILTIN_FAMILIES
from qfi_broadcast.fisher import classical_fisher, optimal_measurement_at, qfi


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("family", choices=sorted(BUILTIN_FAMILIES))
    ap.add_argument("--count", type=int, default=49)
    ap.add_argument("--refs", type=float, nargs="*", default=None)
    args = ap.parse_args()

    f = BUILTIN_FAMILIES[args.family]()
    lo, hi = f.domain
    grid = [t for t in np.linspace(lo, hi, args.count)
            if all(abs(t - s) > 1e-12 for s in f.singular_points)]
    refs = args.refs if args.refs is not None else list(f.default_grid(6))
    w = csv.writer(sys.stdout)
    w.writerow(["theta0", "theta", "ratio"])
    for t0 in refs:
        m = optimal_measurement_at(f, t0)
        for t in grid:
            try:
                r = classical_fisher(f, t, m) / qfi(f, t)
            except DivergentFisher:
                r = float("nan")
            w.writerow([f"{t0:.6f}", f"{t:.6f}", f"{r:.6f}"])


if __name__ == "__main__":
    main()
