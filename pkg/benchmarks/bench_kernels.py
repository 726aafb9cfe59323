"""Compare the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--rays 20]

Both variants are called directly, so the KSVERIFY_DISABLE_NUMBA flag is
irrelevant here. The first numba call (compilation or cache load) is timed
separately and excluded from the steady-state figures.
"""
import argparse
import random
import time

import numpy as np

from ksverify import _kernels
from ksverify.config import build_peres_configuration


def _timed(fn, *args, repeat):
    best = float("inf")
    result = None
    for _ in range(repeat):
        start = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, result


def _bruteforce_case(n_rays, seed):
    # satisfiable systems force a full scan up to the first model; UNSAT ones scan all 2^n
    rng = random.Random(seed)
    edges = sorted({tuple(sorted(rng.sample(range(n_rays), 2))) for _ in range(3 * n_rays)})
    triples = sorted({tuple(sorted(rng.sample(range(n_rays), 3))) for _ in range(n_rays)})
    return (n_rays, np.array(edges, dtype=np.int64).reshape(-1, 2), np.array(triples, dtype=np.int64).reshape(-1, 3))


def _perturb_case(seed):
    rays = build_peres_configuration().float_rays()
    rng = np.random.default_rng(seed)
    jitter = rays + 1e-6 * rng.standard_normal(rays.shape)
    return jitter / np.linalg.norm(jitter, axis=1, keepdims=True), 1e-5


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--rays", type=int, default=20, help="size of the brute-force system")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if not _kernels.HAS_NUMBA:
        print("numba is not installed; only the numpy kernels exist")
        return 1

    bf = _bruteforce_case(args.rays, args.seed)
    vectors, tol = _perturb_case(args.seed)
    adj = _kernels.NUMPY_KERNELS["near_orthogonal_adjacency"](vectors, tol)
    cases = {
        "first_satisfying_mask": bf,
        "near_orthogonal_adjacency": (vectors, tol),
        "count_triangles": (adj,),
    }

    print(f"{'kernel':28s} {'numpy':>11s} {'numba':>11s} {'speedup':>8s} {'first numba call':>17s}")
    for name, case in cases.items():
        start = time.perf_counter()
        _kernels.NUMBA_KERNELS[name](*case)
        warmup = time.perf_counter() - start
        t_np, r_np = _timed(_kernels.NUMPY_KERNELS[name], *case, repeat=args.repeat)
        t_nb, r_nb = _timed(_kernels.NUMBA_KERNELS[name], *case, repeat=args.repeat)
        if not np.array_equal(np.asarray(r_np), np.asarray(r_nb)):
            raise SystemExit(f"{name}: numpy and numba results differ")
        print(f"{name:28s} {t_np * 1e3:9.3f}ms {t_nb * 1e3:9.3f}ms {t_np / t_nb:7.1f}x {warmup * 1e3:15.1f}ms")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
