"""Pilot: tail-inequality ratio LHS/RHS across horizons on a grid lazy walk.

Used to see how stable the ratio is in t (the acceptance band is a factor
of 2 between t = 8 and t = 64 on grid(16,16)), and to print the assembled
end-to-end bound next to the exact Markov-type ratio.
"""

import argparse

from markovtype import chains, spaces, tailcheck


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--space", default="grid:16,16")
    ap.add_argument("--t", type=int, nargs="+", default=[8, 16, 32, 64])
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--m", type=int, default=128)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    args = ap.parse_args()
    X = spaces.generate(*spaces.parse_space_spec(args.space))
    ch = chains.random_walk(X.graph, 0.5)
    print("t,seed,ratio_A,ratio_B,K_lemma_A,budget_A,budget,mtype_exact,mtype_bound")
    for t in args.t:
        for seed in args.seeds:
            exp = tailcheck.run_family_experiment(X, ch, None, t, args.trials, 2.0, seed, args.m)
            ra, rb = (tailcheck.tail_report(exp, side=s) for s in "AB")
            b = tailcheck.stationarity_budget(exp)
            e2e = tailcheck.end_to_end(exp)
            exact = e2e.moment_exact / (t * e2e.one_step)
            print(f"{t},{seed},{ra.ratio:.5f},{rb.ratio:.5f},{ra.K_emp:.3f},{b.mean:.4f},{b.budget:.4f},{exact:.4f},{e2e.ratio_bound:.1f}")


if __name__ == "__main__":
    main()
