"""Pilot: empirical padding probability delta_emp of ball carving.

Prints delta_emp per (space, Delta, eps) and the resulting threshold-constant
bound 4 / (eps sqrt(delta_emp)).  The acceptance check on grid(16,16) reruns
the 10^5-trial pilot at eps = 1/16 itself.
"""

import argparse
import time

from markovtype import embeddings, partitions, spaces


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--space", default="grid:16,16")
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--eps", type=float, nargs="+", default=[1 / 16, 1 / 8, 1 / 4])
    ap.add_argument("--scales", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    X = spaces.generate(*spaces.parse_space_spec(args.space))
    print("space,Delta,eps,trials,delta_emp,K_bound,seconds")
    for j in args.scales:
        for eps in args.eps:
            t0 = time.perf_counter()
            rep = partitions.padding_report(X, 2.0**j, eps, args.trials, args.seed)
            bound = embeddings.theorem_K_bound(eps, rep.delta_emp) if rep.delta_emp > 0 else float("inf")
            print(f"{args.space},{2.0**j:g},{eps:g},{args.trials},{rep.delta_emp:.5f},{bound:.2f},{time.perf_counter() - t0:.1f}")


if __name__ == "__main__":
    main()
