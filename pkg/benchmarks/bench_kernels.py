"""Race each jitted scalar kernel against its vectorized numpy twin.

Usage: python3 benchmarks/bench_kernels.py [--n 400] [--repeats 5]

Both implementations of every kernel are importable regardless of the
HYPTREE_NUMBA flag, so this script times the pairs directly. Timings are
best-of-repeats wall clock after one untimed warmup call (which also pays
jit compilation). Only the layout, metric, pairwise-distance and ratio
kernels appear here; training itself is matmul-dominated and lives on
BLAS either way.
"""

import argparse
import time

import numpy as np

from hyptree import kernels
from hyptree.hypgeom import basepoint, exp_map, lift
from hyptree.trees import WeightedTree, gen_random, tree_metric


def best_of(fn, repeats):
    fn()
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def build_inputs(n: int):
    rng = np.random.default_rng(0)
    t = gen_random(n, seed=1)
    eu = np.array([u for u, _, _ in t.edges], dtype=np.int64)
    ev = np.array([v for _, v, _ in t.edges], dtype=np.int64)
    w = np.array([wt for _, _, wt in t.edges], dtype=np.float64)
    pos = rng.normal(size=(n, 2))

    from hyptree.trees import _csr_arrays  # same packing the metric path uses
    indptr, indices, weights = _csr_arrays(eu, ev, w, n)

    pts_e = rng.normal(size=(n, 8))
    tangents = rng.normal(size=(n, 3)) * 1.5
    pts_h = np.stack([exp_map(basepoint(3), lift(v)).coords for v in tangents])

    dtree = tree_metric(t).matrix
    dspace = dtree * rng.uniform(0.8, 1.25, size=dtree.shape)
    dspace = np.ascontiguousarray((dspace + dspace.T) / 2.0)
    np.fill_diagonal(dspace, 0.0)

    return {
        "fr_step": (
            lambda: kernels.fr_step_loops(pos, eu, ev, 1.0, 0.1),
            lambda: kernels.fr_step_numpy(pos, eu, ev, 1.0, 0.1),
        ),
        "tree_metric": (
            lambda: kernels.tree_metric_loops(indptr, indices, weights, n),
            lambda: kernels.tree_metric_numpy(eu, ev, w, n),
        ),
        "pairwise_euclidean": (
            lambda: kernels.pairwise_euclidean_loops(pts_e),
            lambda: kernels.pairwise_euclidean_numpy(pts_e),
        ),
        "pairwise_hyperboloid": (
            lambda: kernels.pairwise_hyperboloid_loops(pts_h),
            lambda: kernels.pairwise_hyperboloid_numpy(pts_h),
        ),
        "ratio_bounds": (
            lambda: kernels.ratio_bounds_loops(dspace, dtree),
            lambda: kernels.ratio_bounds_numpy(dspace, dtree),
        ),
    }


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=400, help="problem size (nodes/points)")
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    print(f"active backend: {kernels.ACTIVE_BACKEND} (numba "
          f"{'on' if kernels.NUMBA_ENABLED else 'off'}), n={args.n}")
    cases = build_inputs(args.n)
    header = f"{'kernel':<22}{'loops/jit ms':>14}{'numpy ms':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, (jitted, plain) in cases.items():
        tj = best_of(jitted, args.repeats) * 1e3
        tn = best_of(plain, args.repeats) * 1e3
        print(f"{name:<22}{tj:>14.3f}{tn:>12.3f}{tn / tj:>10.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
