"""Hot inner loops, compiled with numba when available.

Set ``KSVERIFY_DISABLE_NUMBA=1`` to force the pure-numpy path. Both paths are
kept importable (``NUMBA_KERNELS`` / ``NUMPY_KERNELS``) so the test suite and
``benchmarks/bench_kernels.py`` can compare them directly.
"""
from __future__ import annotations

import os

import numpy as np

__all__ = [
    "USE_NUMBA",
    "first_satisfying_mask",
    "near_orthogonal_adjacency",
    "count_triangles",
    "NUMPY_KERNELS",
    "NUMBA_KERNELS",
]

_CHUNK = 1 << 16


def _env_disabled() -> bool:
    return os.environ.get("KSVERIFY_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")


try:
    import numba as nb

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not _env_disabled()


# ---------------------------------------------------------------- numpy path


def _np_first_satisfying_mask(n: int, edges: np.ndarray, triples: np.ndarray) -> int:
    """Smallest bitmask (bit i = value of ray i) satisfying every constraint, or -1."""
    shifts = np.arange(n, dtype=np.int64)
    for start in range(0, 1 << n, _CHUNK):
        masks = np.arange(start, min(start + _CHUNK, 1 << n), dtype=np.int64)
        bits = (masks[:, None] >> shifts) & 1
        ok = np.ones(masks.size, dtype=bool)
        if len(edges):
            ok &= (bits[:, edges[:, 0]] | bits[:, edges[:, 1]]).all(axis=1)
        if len(triples):
            zeros = 3 - bits[:, triples].sum(axis=2)
            ok &= (zeros == 1).all(axis=1)
        hit = np.flatnonzero(ok)
        if hit.size:
            return int(masks[hit[0]])
    return -1


def _np_near_orthogonal_adjacency(vectors: np.ndarray, tol: float) -> np.ndarray:
    adj = np.abs(vectors @ vectors.T) < tol
    np.fill_diagonal(adj, False)
    return adj


def _np_count_triangles(adj: np.ndarray) -> int:
    a = adj.astype(np.int64)
    return int(np.trace(a @ a @ a)) // 6


# ---------------------------------------------------------------- numba path

if HAS_NUMBA:
    _jit = nb.njit(cache=True, nogil=True)

    @_jit
    def _nb_first_satisfying_mask(n, edges, triples):
        for mask in range(1 << n):
            good = True
            for e in range(edges.shape[0]):
                if ((mask >> edges[e, 0]) & 1) == 0 and ((mask >> edges[e, 1]) & 1) == 0:
                    good = False
                    break
            if not good:
                continue
            for t in range(triples.shape[0]):
                ones = ((mask >> triples[t, 0]) & 1) + ((mask >> triples[t, 1]) & 1) + ((mask >> triples[t, 2]) & 1)
                if ones != 2:
                    good = False
                    break
            if good:
                return mask
        return -1

    @_jit
    def _nb_near_orthogonal_adjacency(vectors, tol):
        n = vectors.shape[0]
        adj = np.zeros((n, n), dtype=np.bool_)
        for i in range(n):
            for j in range(i + 1, n):
                d = vectors[i, 0] * vectors[j, 0] + vectors[i, 1] * vectors[j, 1] + vectors[i, 2] * vectors[j, 2]
                if abs(d) < tol:
                    adj[i, j] = True
                    adj[j, i] = True
        return adj

    @_jit
    def _nb_count_triangles(adj):
        n = adj.shape[0]
        count = 0
        for i in range(n):
            for j in range(i + 1, n):
                if not adj[i, j]:
                    continue
                for k in range(j + 1, n):
                    if adj[i, k] and adj[j, k]:
                        count += 1
        return count


def _as_index_array(rows, width: int) -> np.ndarray:
    arr = np.asarray(rows, dtype=np.int64)
    return arr.reshape(-1, width)


NUMPY_KERNELS = {
    "first_satisfying_mask": _np_first_satisfying_mask,
    "near_orthogonal_adjacency": _np_near_orthogonal_adjacency,
    "count_triangles": _np_count_triangles,
}

NUMBA_KERNELS = (
    {
        "first_satisfying_mask": _nb_first_satisfying_mask,
        "near_orthogonal_adjacency": _nb_near_orthogonal_adjacency,
        "count_triangles": _nb_count_triangles,
    }
    if HAS_NUMBA
    else {}
)

_ACTIVE = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS


def first_satisfying_mask(n: int, edges, triples) -> int:
    if n > 30:
        raise ValueError(f"brute-force enumeration refused for n={n} > 30")
    return int(_ACTIVE["first_satisfying_mask"](n, _as_index_array(edges, 2), _as_index_array(triples, 3)))


def near_orthogonal_adjacency(vectors: np.ndarray, tol: float) -> np.ndarray:
    return _ACTIVE["near_orthogonal_adjacency"](np.ascontiguousarray(vectors, dtype=np.float64), float(tol))


def count_triangles(adj: np.ndarray) -> int:
    return int(_ACTIVE["count_triangles"](np.ascontiguousarray(adj, dtype=np.bool_)))
