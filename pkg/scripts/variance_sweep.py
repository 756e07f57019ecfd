"""Variance growth and normal-approximation trend for one score over an alpha sweep.

    python scripts/variance_sweep.py --score knn --alphas 64 256 1024 4096 --reps 200 --out runs/knn
"""

import argparse
from pathlib import Path

from stablab import io
from stablab.mc_harness import ExperimentSpec, run_experiment
from stablab.scores import SCORE_IDS


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--score", choices=SCORE_IDS, default="knn")
    ap.add_argument("--alphas", type=float, nargs="+", default=[64, 256, 1024, 4096])
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--k", type=int, default=1)
    ap.add_argument("--seed", type=int, default=12345)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()

    params = {"k": args.k} if args.score in ("knn", "knn-directed", "maxlayer") else {}
    spec = ExperimentSpec(args.score, tuple(args.alphas), reps=args.reps, seed=args.seed, params=params)
    res = run_experiment(spec, threads=args.threads)

    print(f"{'alpha':>8} {'mean':>12} {'var':>12} {'d_K':>8} {'tv_proxy':>8}")
    for s in res.per_alpha:
        print(f"{s.alpha:8g} {s.mean:12.4f} {s.var:12.4f} {s.d_K:8.4f} {s.tv_binned_proxy:8.4f}")
    print(f"log-log variance slope: {res.slope:.4f} +/- {res.slope_stderr:.4f}")

    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        io.write_summary(args.out / "summary.csv", res)
        io.write_samples(args.out / "samples.csv", [(s.alpha, s.samples) for s in res.per_alpha])


if __name__ == "__main__":
    main()
