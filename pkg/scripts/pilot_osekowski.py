"""Pilot: constant demanded by the good-lambda maximal inequality.

For the simple +-1 martingale of length n (and, with --q, for Gaussian-sign
martingales in l_q) records K_emp over a lambda grid for several (beta,
delta), together with the Pisier moment ratio against its bound C = q - 1.
"""

import argparse

import numpy as np

from markovtype import martingales, tailcheck


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[16, 64])
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--q", type=float, nargs="+", default=[2.0, 4.0])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print("n,beta,delta,K_emp,lhs,rhs")
    for n in args.n:
        inc = np.random.default_rng([args.seed, n]).choice([-1.0, 1.0], (args.trials, n))
        exp = tailcheck.family_from_increments(inc, 2.0, 1.0)
        rep = tailcheck.tail_report(exp)
        for beta, delta in [(5.0, 0.25), (2.0, 0.5), (3.0, 1.0), (5.0, 2.0), (5.0, 3.5)]:
            K = tailcheck.osekowski_triple_check(exp, None, beta, delta).K_emp
            print(f"{n},{beta:g},{delta:g},{K:.4f},{rep.lhs:.4f},{rep.rhs:g}")
    print()
    print("q,steps,pisier_ratio,C")
    for q in args.q:
        ctx = martingales.NormContext.for_q(q)
        M = martingales.sign_martingale(32, 6, 20_000, args.seed)
        print(f"{q:g},32,{martingales.pisier_ratio(M, ctx):.4f},{ctx.C:g}")


if __name__ == "__main__":
    main()
