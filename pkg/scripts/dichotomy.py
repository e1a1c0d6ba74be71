"""Three-agent recurrence: consensus for rho_p = p, a positive floor for rho_p = (1+p)^2.

Iterates the exact two-step map and prints the diameter against the
product of (1 - 2 lambda_p).
"""
import argparse

import numpy as np

from tvconsensus.scenarios import RhoSequence, oracle_lambda, oracle_three_agent_run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--periods", type=int, default=2000)
    args = ap.parse_args()
    x0 = np.array([-1.0, 0.0, 1.0])
    for rho in (RhoSequence("linear"), RhoSequence("power", exponent=2.0), RhoSequence("power", exponent=1.0)):
        xs = oracle_three_agent_run(x0, rho, args.periods)
        d = np.ptp(xs, axis=1)
        lam = np.array([oracle_lambda(rho(p)) for p in range(args.periods)])
        prod = np.cumprod(1 - 2 * lam) * d[0]
        print(f"{rho.label():>6}: D({args.periods}) = {d[-1]:.6g}, product bound {prod[-1]:.6g}, "
              f"sum lambda = {lam.sum():.4f}")


if __name__ == "__main__":
    main()
