#!/usr/bin/env python3
"""Track the equivalence-theorem gap max_S G(S) - d while the solver runs.

The gap is computed by scanning every subset, so keep the instance small.
"""

import argparse

import numpy as np

from rankdesign import ItemFeatureMatrix, SolverConfig, optimality_gap, solve
from rankdesign.solver import initial_design


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--N", type=int, default=8)
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--K", type=int, default=3)
    p.add_argument("--mode", choices=("full", "randomized"), default="full")
    p.add_argument("--R", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    features = ItemFeatureMatrix(np.random.default_rng(args.seed).standard_normal((args.N, args.d)))
    coll = features.collection(args.K)
    pi0 = initial_design(features, coll, 0.0, np.random.default_rng(args.seed))
    print(f"{coll.cardinality} subsets, start support {pi0.nnz}")
    print(f"{'iters':>6} {'log det':>10} {'gap':>10} {'support':>8}")
    for T in (1, 10, 30, 100, 300, 1000):
        pi, trace = solve(features, coll, pi0, SolverConfig(T_od=T, gamma=0.0, lmo_mode=args.mode, R=args.R))
        print(f"{T:>6} {trace.objectives[-1]:>10.5f} {optimality_gap(pi, features):>10.5f} {pi.nnz:>8}")


if __name__ == "__main__":
    main()
