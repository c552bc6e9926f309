"""Monte Carlo check that the MLE variance approaches the Cramér-Rao bound.

For each sample size n, estimates θ on the equatorial family with the SLD
measurement at θ and prints n·Var(θ̂) alongside 1/F.

    python scripts/crb_saturation.py --theta 1.0 --trials 500 --seed 1
"""

import argparse

import numpy as np

from qfi_broadcast.families import builtin_equatorial
from qfi_broadcast.fisher import optimal_measurement_at, simulate_estimation


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--theta", type=float, default=1.0)
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 1000, 10000])
    args = ap.parse_args()

    f = builtin_equatorial()
    m = optimal_measurement_at(f, args.theta)
    window = (args.theta - np.pi / 2, args.theta + np.pi / 2)
    print(f"{'n':>8s} {'n*var':>10s} {'1/F':>8s} {'var/crb':>8s} {'bias':>10s}")
    for n in args.sizes:
        rep = simulate_estimation(f, m, args.theta, n, args.trials, args.seed, window)
        print(f"{n:8d} {n * rep.estimator_variance:10.4f} {1 / rep.fisher:8.4f} "
              f"{rep.estimator_variance / rep.crb:8.3f} {rep.estimator_mean - args.theta:10.2e}")


if __name__ == "__main__":
    main()
