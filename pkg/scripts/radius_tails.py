"""Empirical survival of certified stabilisation radii against the analytic tail bounds.

    python scripts/radius_tails.py --alpha 1024 --reps 100
"""

import argparse
from pathlib import Path

import numpy as np

from stablab import io
from stablab.mc_harness import ExperimentSpec, radius_tail_empirical


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, default=1024.0)
    ap.add_argument("--reps", type=int, default=100)
    ap.add_argument("--k", type=int, default=1)
    ap.add_argument("--tmax", type=int, default=30)
    ap.add_argument("--seed", type=int, default=12345)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()

    grid = np.arange(0, args.tmax + 1, dtype=float)
    for score in ("knn", "voronoi"):
        params = {"k": args.k} if score == "knn" else {}
        spec = ExperimentSpec(score, (args.alpha,), reps=args.reps, seed=args.seed, params=params)
        curve = radius_tail_empirical(spec, grid, threads=args.threads, clamp=True)
        print(f"{score}: {curve.n_points} pooled radii")
        print(f"{'t':>4} {'survival':>10} {'stderr':>10} {'bound':>10}")
        for row in zip(curve.t, curve.survival, curve.stderr, curve.bound):
            print(f"{row[0]:4g} {row[1]:10.4g} {row[2]:10.2g} {row[3]:10.4g}")
        if args.out:
            args.out.mkdir(parents=True, exist_ok=True)
            io.write_survival(args.out / f"survival_{score}.csv", curve)


if __name__ == "__main__":
    main()
