"""Benchmark the compiled kernels against the pure numpy fallback.

Runs the three hot kernels (grid clustering, bulk nearest-node, grouped
range maxima) through both backends on identical inputs and prints a
timing table plus the speedup. Usage:

    python benchmarks/bench_kernels.py [--n 100000] [--queries 200000]
"""

import argparse
import math
import time

import numpy as np

from percap import _kernels_py
from percap.spatial import sample_deployment

try:
    from percap import _corekern
except ImportError:
    _corekern = None


def _canon(labels):
    """Dense cluster ids ordered by minimum member (partition-equality form)."""
    uniq, inv = np.unique(labels, return_inverse=True)
    first = np.full(uniq.shape[0], labels.shape[0], dtype=np.int64)
    np.minimum.at(first, inv, np.arange(labels.shape[0], dtype=np.int64))
    remap = np.empty(uniq.shape[0], dtype=np.int64)
    remap[np.argsort(first, kind="stable")] = np.arange(uniq.shape[0])
    return remap[inv]


def timed(fn, *args, repeat=3):
    best = math.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--queries", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    d = sample_deployment(args.n, 1.0, args.seed)
    r = 2.0  # gamma = 4 pi at unit density
    g = d.grid(r)
    rng = np.random.default_rng(args.seed)
    qx = rng.random(args.queries) * d.side
    qy = rng.random(args.queries) * d.side
    ng = d.default_grid()

    sizes = 5_000_000
    vals = rng.random(sizes)
    k = 200_000
    starts = rng.integers(0, sizes - 64, size=k)
    ends = starts + rng.integers(1, 64, size=k)
    groups = rng.integers(0, 10_000, size=k)

    cases = [
        ("cluster_labels (n=%d, gamma=4pi)" % args.n, "cluster_labels",
         (g.xs, g.ys, g.order, g.start, g.nx, g.ny, r)),
        ("nearest_bulk (%d queries)" % args.queries, "nearest_bulk",
         (ng.xs, ng.ys, ng.order, ng.start, ng.nx, ng.ny, ng.cell_size, qx, qy)),
        ("range_max (%dk ranges)" % (k // 1000), "range_max",
         (vals, starts.astype(np.int64), ends.astype(np.int64),
          groups.astype(np.int64), 10_000)),
    ]

    print(f"{'kernel':<42} {'pure (s)':>10} {'compiled (s)':>13} {'speedup':>9}")
    for label, name, inputs in cases:
        t_py, out_py = timed(getattr(_kernels_py, name), *inputs)
        if _corekern is None:
            print(f"{label:<42} {t_py:>10.3f} {'n/a':>13} {'n/a':>9}")
            continue
        t_c, out_c = timed(getattr(_corekern, name), *inputs)
        if name == "cluster_labels":
            agree = np.array_equal(_canon(out_py), _canon(out_c))
        else:
            agree = np.array_equal(np.asarray(out_py), np.asarray(out_c))
        flag = "" if agree else "  (MISMATCH!)"
        print(f"{label:<42} {t_py:>10.3f} {t_c:>13.3f} {t_py / t_c:>8.1f}x{flag}")


if __name__ == "__main__":
    main()
