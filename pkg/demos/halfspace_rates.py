"""Alternating projections between two halfspaces.

For each angle the fitted per-cycle rate is compared with cos^2(theta) and
with the rate predicted from the composed certificate and the sampled
subregularity modulus.

    python demos/halfspace_rates.py
"""

import math

from geoprox.harness import preset, run_experiment


def main():
    print(f"{'theta':>8} {'fitted':>10} {'cos^2':>10} {'mu_hat':>8} {'gamma':>8} {'verdict':>8}")
    for k in range(1, 8):
        theta = k * math.pi / 16
        res = run_experiment(preset("two_halfspaces", theta=theta))
        rep = res.report
        gamma = rep.prediction.gamma if rep.prediction.valid else float("nan")
        print(f"{theta:8.4f} {rep.fitted_rate:10.6f} {math.cos(theta) ** 2:10.6f} "
              f"{res.subregularity.mu:8.3f} {gamma:8.4f} {rep.verdict:>8}")


if __name__ == "__main__":
    main()
