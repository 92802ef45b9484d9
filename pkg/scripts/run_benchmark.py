"""Train the baseline (c=0) and the topology arm on the standard benchmark and print mean metrics.

    python3 scripts/run_benchmark.py --seeds 10 --steps 300 --variant toma --c 0.5
"""
import argparse
import time

import numpy as np

from toma.trainer import run_benchmark


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--steps", type=int, default=300)
    ap.add_argument("--variant", default="toma")
    ap.add_argument("--c", type=float, default=0.5)
    ap.add_argument("--lr", type=float, default=0.05)
    args = ap.parse_args()
    t0 = time.perf_counter()
    for label, c in (("baseline", 0.0), (args.variant, args.c)):
        rows = run_benchmark(c=c, variant=args.variant, seeds=range(args.seeds), steps=args.steps, learning_rate=args.lr)
        mst = np.array([r["mst_overlap"] for r in rows])
        r1 = np.array([r["retrieval_r1"] for r in rows])
        print(f"{label:<10} c={c:<4} mst_overlap {mst.mean():.4f} +- {mst.std():.4f}  R@1 {r1.mean():.4f} +- {r1.std():.4f}")
    print(f"elapsed {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
