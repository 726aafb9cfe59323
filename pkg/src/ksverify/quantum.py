"""Spin-1 squared-spin measurements and the twinned total-spin-zero state.

Works in the real Cartesian (vector) representation of spin 1: the squared
spin component along a unit vector w is ``I - w w^T`` and the spin-zero
state of two particles is ``sum_i e_i (x) e_i / sqrt(3)``. No complex
arithmetic is needed for the squared-spin observables.

Sampling uses numpy's PCG64 bit generator (``numpy.random.Generator(PCG64(seed))``),
whose output stream is specified and identical across platforms.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "A_OUTCOMES",
    "CELLS",
    "OutcomeDistribution",
    "SpinReport",
    "SampleRun",
    "squared_spin",
    "verify_spin_axiom",
    "singlet_state",
    "joint_distribution",
    "twin_disagreement",
    "sample_run",
]

# exact-claim tolerance and input-validation tolerance
EXACT_TOL = 1e-12
INPUT_TOL = 1e-9
SPECTRUM_TOL = 1e-10

# a-side outcome k has its single 0 at position k
A_OUTCOMES: tuple[tuple[int, int, int], ...] = ((0, 1, 1), (1, 0, 1), (1, 1, 0))
CELLS: tuple[tuple[tuple[int, int, int], int], ...] = tuple((a, b) for a in A_OUTCOMES for b in (0, 1))


def _as_unit(w, tol: float) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (3,):
        raise ValueError(f"direction must be a 3-vector, got shape {w.shape}")
    if abs(np.linalg.norm(w) - 1.0) > tol:
        raise ValueError(f"direction {w} is not a unit vector")
    return w


def _as_orthonormal_triple(triple, tol: float = INPUT_TOL) -> np.ndarray:
    t = np.asarray(triple, dtype=float)
    if t.shape != (3, 3):
        raise ValueError(f"triple must be three 3-vectors, got shape {t.shape}")
    if np.max(np.abs(t @ t.T - np.eye(3))) > tol:
        raise ValueError("triple is not orthonormal")
    return t


def squared_spin(direction) -> np.ndarray:
    """Squared spin component along a unit direction: ``I - w w^T``."""
    w = _as_unit(direction, EXACT_TOL)
    return np.eye(3) - np.outer(w, w)


@dataclass
class SpinReport:
    max_commutator: float
    sum_deviation: float
    spectrum_deviation: float
    joint_outcomes: list[tuple[int, int, int]]

    @property
    def passed(self) -> bool:
        return (
            self.max_commutator < EXACT_TOL
            and self.sum_deviation < EXACT_TOL
            and self.spectrum_deviation < SPECTRUM_TOL
            and sorted(self.joint_outcomes) == sorted(A_OUTCOMES)
        )

    def to_json(self) -> dict:
        return {
            "max_commutator": self.max_commutator,
            "sum_deviation": self.sum_deviation,
            "spectrum_deviation": self.spectrum_deviation,
            "joint_outcomes": [list(o) for o in self.joint_outcomes],
            "passed": self.passed,
        }


def verify_spin_axiom(triple) -> SpinReport:
    """Check that squared spins along an orthonormal triple always read 1,0,1.

    The operators commute, sum to 2I and each has spectrum {0,1,1}; their
    common eigenbasis is the triple itself, and the joint eigenvalues on
    it are the three arrangements of (1,0,1).
    """
    t = _as_orthonormal_triple(triple)
    ops = [squared_spin(v / np.linalg.norm(v)) for v in t]
    comm = max(np.max(np.abs(ops[i] @ ops[j] - ops[j] @ ops[i])) for i in range(3) for j in range(i + 1, 3))
    total = np.max(np.abs(sum(ops) - 2 * np.eye(3)))
    spectrum = max(np.max(np.abs(np.linalg.eigvalsh(op) - [0.0, 1.0, 1.0])) for op in ops)
    joint = []
    for v in t:
        eig = [float(v @ op @ v) for op in ops]
        joint.append(tuple(int(round(e)) for e in eig))
        spectrum = max(spectrum, max(abs(e - round(e)) for e in eig))
    return SpinReport(float(comm), float(total), float(spectrum), joint)


def singlet_state() -> np.ndarray:
    """The twinned state (e1 e1 + e2 e2 + e3 e3)/sqrt(3) as a 9-vector."""
    return np.eye(3).reshape(9) / math.sqrt(3.0)


@dataclass
class OutcomeDistribution:
    """Probabilities of (a-outcome, b-outcome) cells, in ``CELLS`` order."""

    probs: dict[tuple[tuple[int, int, int], int], float]

    def total(self) -> float:
        return float(sum(self.probs.values()))

    def vector(self) -> np.ndarray:
        return np.array([self.probs[c] for c in CELLS])

    def marginal_b(self) -> dict[int, float]:
        return {b: float(sum(p for (a, bb), p in self.probs.items() if bb == b)) for b in (0, 1)}

    def marginal_a(self) -> dict[tuple[int, int, int], float]:
        return {a: float(sum(p for (aa, b), p in self.probs.items() if aa == a)) for a in A_OUTCOMES}

    def to_json(self) -> list[dict]:
        return [{"a": list(a), "b": b, "p": self.probs[(a, b)]} for a, b in CELLS]


def joint_distribution(triple_a, w_b) -> OutcomeDistribution:
    """Born-rule distribution of A's triple experiment and B's single measurement.

    A's outcome with its 0 at position k is the spectral projector
    ``x_k x_k^T`` of the commuting family; B's outcome 0 is ``w w^T`` and
    outcome 1 its complement.
    """
    t = _as_orthonormal_triple(triple_a)
    w = _as_unit(w_b, INPUT_TOL)
    psi = singlet_state()
    b_proj = {0: np.outer(w, w), 1: np.eye(3) - np.outer(w, w)}
    probs = {}
    for k, a in enumerate(A_OUTCOMES):
        a_proj = np.outer(t[k], t[k])
        for b in (0, 1):
            p = float(psi @ np.kron(a_proj, b_proj[b]) @ psi)
            probs[(a, b)] = max(p, 0.0)
    return OutcomeDistribution(probs)


def twin_disagreement(dist: OutcomeDistribution, position: int) -> float:
    """Probability that B's answer differs from A's component at ``position``."""
    return float(sum(p for (a, b), p in dist.probs.items() if a[position] != b))


@dataclass
class SampleRun:
    seed: int
    n: int
    exact: OutcomeDistribution
    a_index: np.ndarray
    b_outcome: np.ndarray
    triple_id: Optional[int] = None
    w_id: Optional[int] = None
    counts: dict = field(init=False)

    def __post_init__(self) -> None:
        self.counts = {c: 0 for c in CELLS}
        cell = self.a_index * 2 + self.b_outcome
        for i, c in enumerate(np.bincount(cell, minlength=6)):
            self.counts[CELLS[i]] = int(c)

    def frequency(self, cell) -> float:
        return self.counts[cell] / self.n

    def sigma_band(self, cell) -> float:
        p = self.exact.probs[cell]
        return 3.0 * math.sqrt(p * (1.0 - p) / self.n)

    def within_band(self, cell) -> bool:
        return abs(self.frequency(cell) - self.exact.probs[cell]) <= self.sigma_band(cell)

    def agreements(self, position: int) -> int:
        a = np.array([o[position] for o in A_OUTCOMES])[self.a_index]
        return int(np.sum(a == self.b_outcome))

    def b_zero_frequency(self) -> float:
        return float(np.mean(self.b_outcome == 0))

    def cells_json(self) -> list[dict]:
        return [
            {
                "a": list(c[0]),
                "b": c[1],
                "exact": self.exact.probs[c],
                "count": self.counts[c],
                "empirical": self.frequency(c),
                "band": self.sigma_band(c),
                "within_3sigma": self.within_band(c),
            }
            for c in CELLS
        ]

    def log_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["run_index", "triple_id", "w_id", "a_outcome", "b_outcome"])
        tid = "" if self.triple_id is None else self.triple_id
        wid = "" if self.w_id is None else self.w_id
        for i, (k, b) in enumerate(zip(self.a_index.tolist(), self.b_outcome.tolist())):
            writer.writerow([i, tid, wid, "".join(map(str, A_OUTCOMES[k])), b])
        return buf.getvalue()


def sample_run(
    triple_a, w_b, n: int, seed: int, *, triple_id: Optional[int] = None, w_id: Optional[int] = None
) -> SampleRun:
    """Draw ``n`` joint outcomes by inverse-CDF sampling of one uniform per run."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    dist = joint_distribution(triple_a, w_b)
    p = dist.vector()
    cdf = np.cumsum(p / p.sum())
    cdf[-1] = 1.0
    rng = np.random.Generator(np.random.PCG64(seed))
    u = rng.random(n)
    cell = np.minimum(np.searchsorted(cdf, u, side="right"), len(CELLS) - 1)
    return SampleRun(seed, n, dist, cell // 2, cell % 2, triple_id, w_id)


def random_orthonormal_triple(rng: np.random.Generator) -> np.ndarray:
    """Rows of a Haar-random rotation."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q.T

