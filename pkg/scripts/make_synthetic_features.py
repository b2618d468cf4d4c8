#!/usr/bin/env python3
"""Write a Gaussian item feature CSV (rows rescaled to max norm 1) and a random unit theta."""

import argparse
from pathlib import Path

import numpy as np

from rankdesign.harness.experiment import make_synthetic_features, random_theta
from rankdesign.harness.io import save_vector, write_features


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--N", type=int, default=30, help="items per list")
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--lists", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="items.csv")
    p.add_argument("--theta-out", help="also write a unit-norm Gaussian theta here")
    args = p.parse_args()

    rng = np.random.default_rng(args.seed)
    sizes = (args.N,) * args.lists
    features = make_synthetic_features(args.N * args.lists, args.d, rng, sizes)
    write_features(args.out, features)
    print(f"wrote {features.N} items x {features.d} features in {args.lists} list(s) to {Path(args.out)}")
    if args.theta_out:
        save_vector(args.theta_out, random_theta(args.d, rng))
        print(f"wrote theta to {args.theta_out}")


if __name__ == "__main__":
    main()
