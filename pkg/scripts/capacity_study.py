#!/usr/bin/env python3
"""Numerical study of the long-run sausage volume rate.

Three independent measurements identify the rate constant of
E|B_1(path up to t)| / t for heavy-tailed motion:

  1. hitting probability of a far unit ball against the closed form
     I_{1/|x|^2}((d-alpha)/2, alpha/2),
  2. occupation time of a small far ball against the Green function,
  3. the sausage rate ladder itself under step refinement.

All three agree with ball_capacity(alpha, d) and reject the larger
gamma-product value capacity_constant(alpha, d) once alpha < 2.
"""
import argparse
import math
import pathlib
import sys

import numpy as np
from scipy import special

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from levybool.field import RadiusLaw
from levybool.stable import StableParams, sample_increments
from levybool.volume import ball_capacity, capacity_constant, expected_sausage_rate


def hitting_experiment(params, distance, n, horizon, h, rng):
    pos = np.tile(np.array([-distance] + [0.0] * (params.dim - 1)), (n, 1))
    hit = np.zeros(n, dtype=bool)
    for _ in range(int(horizon / h)):
        pos += sample_increments(params, h, n, rng)
        np.logical_or(hit, (pos ** 2).sum(1) <= 1.0, out=hit)
    return float(hit.mean()), 1.96 * math.sqrt(max(hit.mean() * (1 - hit.mean()), 1 / n) / n)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, default=1.0)
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=5)
    args = ap.parse_args()
    params = StableParams(args.alpha, 2)
    rng = np.random.default_rng(args.seed)

    print(f"alpha={params.alpha}, d={params.dim}")
    print(f"gamma-product constant: {capacity_constant(params.alpha, 2):.6f}")
    print(f"measured ball capacity: {ball_capacity(params.alpha, 2):.6f}")

    x = 4.0
    exact = special.betainc((2 - params.alpha) / 2, params.alpha / 2,
                            1.0 / x ** 2)
    p, hw = hitting_experiment(params, x, args.n, 200.0, 0.02, rng)
    print(f"\nhit B_1 from |x|={x}: simulated {p:.4f} +- {hw:.4f}, "
          f"closed form {exact:.4f}")
    green = x ** (params.alpha - 2) / capacity_constant(params.alpha, 2)
    print(f"ball-capacity prediction:  {ball_capacity(params.alpha, 2) * green:.4f}")
    print(f"gamma-product prediction:  {capacity_constant(params.alpha, 2) * green:.4f}")

    print("\nsausage rate ladder (R = 1):")
    res = expected_sausage_rate(params, RadiusLaw.constant(1.0), 50.0, 0.005,
                                120, rng, times=[10.0, 25.0, 50.0],
                                h_check=False)
    for t, m, s in zip(res.times, res.rate_mean, res.rate_sem):
        print(f"  T={t:5.1f}: {m:.3f} +- {1.96 * s:.3f}")


if __name__ == "__main__":
    main()
