"""Single-threaded wall time of ToMA vs contrastive forward + backward.

    python3 scripts/overhead.py --n 128 --d 512
"""
import argparse
import time

import numpy as np
from threadpoolctl import threadpool_limits

from toma.alignment import contrastive_loss, toma_loss


def median_ms(fn, repeats):
    fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return 1e3 * float(np.median(times))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--d", type=int, default=512)
    ap.add_argument("--repeats", type=int, default=40)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    rng = np.random.default_rng(9)
    x, y = rng.normal(size=(2, args.n, args.d))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    y /= np.linalg.norm(y, axis=1, keepdims=True)
    with threadpool_limits(limits=args.threads):
        t = median_ms(lambda: toma_loss(x, y, grad=True), args.repeats)
        c = median_ms(lambda: contrastive_loss(x, y, grad=True), args.repeats)
    print(f"toma {t:.2f} ms  contrastive {c:.2f} ms  ratio {t / c:.2f}")


if __name__ == "__main__":
    main()
