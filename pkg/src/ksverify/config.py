"""The 33-ray Peres configuration and its combinatorial structure.

The rays are the symmetry axes of the three cubes obtained by turning the
axis-aligned cube through 45 degrees about x, y and z. Everything downstream
(orthogonal pairs, triples, completions, symmetries) is derived by exact
dot products, so the module doubles as a self-check of the construction.
"""
from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .exact import ExactScalar, ExactVector3, Ray, canonicalize, rotate45, vec

__all__ = [
    "ConfigurationError",
    "CompletionTriple",
    "Configuration",
    "SymmetryElement",
    "PerturbationReport",
    "white_cube_axes",
    "build_configuration",
    "build_peres_configuration",
    "quadruple_count",
    "symmetry_group",
    "perturbation_check",
    "configuration_to_json",
    "configuration_from_json",
    "configuration_to_csv",
    "load_configuration",
]

PERES_COUNTS = {"rays": 33, "orthogonal_pairs": 72, "internal_triples": 16, "completion_triples": 24}


class ConfigurationError(ValueError):
    """A configuration failed a structural self-check."""


@dataclass(frozen=True)
class CompletionTriple:
    pair: tuple[int, int]
    third: Ray


@dataclass(frozen=True)
class Configuration:
    rays: tuple[Ray, ...]
    orthogonal_pairs: tuple[tuple[int, int], ...]
    internal_triples: tuple[tuple[int, int, int], ...]
    completion_triples: tuple[CompletionTriple, ...] = ()
    name: str = field(default="custom", compare=False)

    @property
    def n_rays(self) -> int:
        return len(self.rays)

    @property
    def n_triples(self) -> int:
        return len(self.internal_triples) + len(self.completion_triples)

    @cached_property
    def index(self) -> dict[Ray, int]:
        return {r: i for i, r in enumerate(self.rays)}

    def triple_members(self, t: int) -> tuple[int, ...]:
        """Ray indices (inside the set) of triple ``t``; internal triples come first."""
        if t < len(self.internal_triples):
            return self.internal_triples[t]
        return self.completion_triples[t - len(self.internal_triples)].pair

    def triple_rays(self, t: int) -> tuple[Ray, Ray, Ray]:
        """All three rays of triple ``t``, the outside third last for completions."""
        if t < len(self.internal_triples):
            return tuple(self.rays[i] for i in self.internal_triples[t])
        c = self.completion_triples[t - len(self.internal_triples)]
        return (self.rays[c.pair[0]], self.rays[c.pair[1]], c.third)

    def float_rays(self) -> np.ndarray:
        return np.array([r.to_float() for r in self.rays])

    @cached_property
    def config_hash(self) -> str:
        payload = json.dumps(configuration_to_json(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


def white_cube_axes() -> list[Ray]:
    """Face, edge and body-diagonal axes of the axis-aligned cube (13 rays)."""
    vectors = [vec(1, 0, 0), vec(0, 1, 0), vec(0, 0, 1)]
    for s in (1, -1):
        vectors += [vec(1, s, 0), vec(1, 0, s), vec(0, 1, s)]
    for s1, s2 in itertools.product((1, -1), repeat=2):
        vectors.append(vec(1, s1, s2))
    return sorted({canonicalize(v) for v in vectors})


def build_configuration(
    rays: Iterable[Ray], *, include_completions: bool = True, sort: bool = True, name: str = "custom"
) -> Configuration:
    """Derive pairs, triples and completions of an arbitrary ray set by exact dot products."""
    rays = list(dict.fromkeys(rays))
    if sort:
        rays.sort()
    n = len(rays)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if not rays[i].rep.dot(rays[j].rep)]
    adjacent = set(pairs)
    triples = [
        (i, j, k) for i, j in pairs for k in range(j + 1, n) if (i, k) in adjacent and (j, k) in adjacent
    ]
    completions: list[CompletionTriple] = []
    if include_completions:
        covered = {p for i, j, k in triples for p in ((i, j), (i, k), (j, k))}
        for i, j in pairs:
            if (i, j) not in covered:
                third = canonicalize(rays[i].rep.cross(rays[j].rep))
                completions.append(CompletionTriple((i, j), third))
    return Configuration(tuple(rays), tuple(pairs), tuple(triples), tuple(completions), name=name)


def _self_check(config: Configuration, include_completions: bool) -> None:
    expected = dict(PERES_COUNTS)
    if not include_completions:
        expected["completion_triples"] = 0
    got = {
        "rays": config.n_rays,
        "orthogonal_pairs": len(config.orthogonal_pairs),
        "internal_triples": len(config.internal_triples),
        "completion_triples": len(config.completion_triples),
    }
    for key, want in expected.items():
        if got[key] != want:
            raise ConfigurationError(f"Peres self-check failed: {key} = {got[key]}, expected {want}")
    members = set(config.rays)
    for c in config.completion_triples:
        if c.third in members:
            raise ConfigurationError(f"completion third {c.third} lies inside the configuration")


def build_peres_configuration(include_completions: bool = True) -> Configuration:
    """Union of the axes of the three 45-degree-rotated cubes, with full structure."""
    white = [r.rep for r in white_cube_axes()]
    rays = {canonicalize(rotate45(v, axis)) for axis in ("x", "y", "z") for v in white}
    config = build_configuration(rays, include_completions=include_completions, name="peres")
    _self_check(config, include_completions)
    return config


def quadruple_count(config: Configuration) -> int:
    return config.n_triples * config.n_rays


# ------------------------------------------------------------------ symmetry


@dataclass(frozen=True)
class SymmetryElement:
    """A signed coordinate permutation and the ray permutation it induces.

    ``matrix[i][j]`` is 0 or +-1; ``permutation[k]`` is the index of the
    image of ray ``k``.
    """

    matrix: tuple[tuple[int, int, int], ...]
    permutation: tuple[int, ...]

    def apply(self, v: ExactVector3) -> ExactVector3:
        return ExactVector3(*(sum((v[j] * m for j, m in enumerate(row) if m), ExactScalar()) for row in self.matrix))

    def compose(self, other: SymmetryElement) -> SymmetryElement:
        """``self`` after ``other``."""
        matrix = tuple(
            tuple(sum(self.matrix[i][k] * other.matrix[k][j] for k in range(3)) for j in range(3)) for i in range(3)
        )
        return SymmetryElement(matrix, tuple(self.permutation[p] for p in other.permutation))


def _signed_permutation_matrices() -> Iterable[tuple[tuple[int, int, int], ...]]:
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1, -1), repeat=3):
            yield tuple(tuple(signs[i] if j == perm[i] else 0 for j in range(3)) for i in range(3))


def symmetry_group(config: Configuration) -> list[SymmetryElement]:
    """All signed coordinate permutations mapping the ray set onto itself."""
    group = []
    pairs = set(config.orthogonal_pairs)
    triples = set(config.internal_triples)
    for matrix in _signed_permutation_matrices():
        probe = SymmetryElement(matrix, ())
        images = [config.index.get(canonicalize(probe.apply(r.rep))) for r in config.rays]
        if any(i is None for i in images):
            continue
        element = SymmetryElement(matrix, tuple(images))
        # a linear isometry cannot break orthogonality; this guards the index bookkeeping
        if {tuple(sorted((element.permutation[i], element.permutation[j]))) for i, j in pairs} != pairs:
            raise ConfigurationError(f"symmetry {matrix} does not preserve orthogonal pairs")
        if {tuple(sorted(element.permutation[i] for i in t)) for t in triples} != triples:
            raise ConfigurationError(f"symmetry {matrix} does not preserve internal triples")
        group.append(element)
    return group


# -------------------------------------------------------------- perturbation


@dataclass
class PerturbationReport:
    epsilon: float
    trials: int
    seed: int
    tolerance: float
    expected_pairs: int
    expected_triangles: int
    violations: list[dict] = field(default_factory=list)

    @property
    def preserved(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "trials": self.trials,
            "seed": self.seed,
            "tolerance": self.tolerance,
            "expected_pairs": self.expected_pairs,
            "expected_triangles": self.expected_triangles,
            "preserved": self.preserved,
            "violation_count": len(self.violations),
            "violations": self.violations,
        }


# float slack so that epsilon = 0 still recognises the exactly orthogonal pairs
_FLOAT_SLACK = 1e-12


def _perturb(units: np.ndarray, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Tilt each unit vector by an angle uniform in [0, epsilon] in a random direction."""
    if epsilon == 0:
        return units.copy()
    g = rng.standard_normal(units.shape)
    g -= np.sum(g * units, axis=1, keepdims=True) * units
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    angle = rng.uniform(0.0, epsilon, size=(units.shape[0], 1))
    return np.cos(angle) * units + np.sin(angle) * g


def perturbation_check(
    config: Configuration, epsilon: float, trials: int, seed: int, *, workers: int = 1
) -> PerturbationReport:
    """Check that the orthogonality graph survives angular jitter of size ``epsilon``.

    Trial ``t`` draws from ``numpy.random.default_rng([seed, t])`` (PCG64), so
    serial and threaded runs give identical reports.
    """
    if not 0 <= epsilon < 0.01:
        raise ValueError(f"epsilon must satisfy 0 <= epsilon < 0.01, got {epsilon}")
    if trials < 1:
        raise ValueError(f"trials must be positive, got {trials}")
    units = config.float_rays()
    n = config.n_rays
    exact = np.zeros((n, n), dtype=bool)
    for i, j in config.orthogonal_pairs:
        exact[i, j] = exact[j, i] = True
    tol = 3 * epsilon + _FLOAT_SLACK
    expected_triangles = len(config.internal_triples)

    def run(trial: int) -> dict | None:
        rng = np.random.default_rng([seed, trial])
        adj = _kernels.near_orthogonal_adjacency(_perturb(units, epsilon, rng), tol)
        n_pairs = int(adj.sum()) // 2
        n_tri = _kernels.count_triangles(adj)
        if n_pairs == len(config.orthogonal_pairs) and n_tri == expected_triangles and np.array_equal(adj, exact):
            return None
        return {
            "trial": trial,
            "pairs": n_pairs,
            "triangles": n_tri,
            "spurious_pairs": int(np.sum(adj & ~exact)) // 2,
            "lost_pairs": int(np.sum(exact & ~adj)) // 2,
        }

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, range(trials)))
    else:
        outcomes = [run(t) for t in range(trials)]
    return PerturbationReport(
        epsilon=epsilon,
        trials=trials,
        seed=seed,
        tolerance=tol,
        expected_pairs=len(config.orthogonal_pairs),
        expected_triangles=expected_triangles,
        violations=[o for o in outcomes if o is not None],
    )


# ------------------------------------------------------------------------ io


def configuration_to_json(config: Configuration) -> dict:
    return {
        "rays": [r.to_json() for r in config.rays],
        "orthogonal_pairs": [list(p) for p in config.orthogonal_pairs],
        "internal_triples": [list(t) for t in config.internal_triples],
        "completion_triples": [{"pair": list(c.pair), "third": c.third.to_json()} for c in config.completion_triples],
    }


def _index_tuple(raw: Sequence, width: int, n: int, what: str) -> tuple[int, ...]:
    if len(raw) != width or not all(isinstance(i, int) and 0 <= i < n for i in raw):
        raise ConfigurationError(f"bad {what} entry {raw!r} for {n} rays")
    return tuple(sorted(raw))


def configuration_from_json(data: dict, name: str = "imported") -> Configuration:
    """Load a configuration and re-derive its structure to validate the file."""
    try:
        rays = [Ray.from_json(r) for r in data["rays"]]
        n = len(rays)
        if len(set(rays)) != n:
            raise ConfigurationError("duplicate rays in configuration")
        pairs = tuple(sorted(_index_tuple(p, 2, n, "orthogonal_pairs") for p in data.get("orthogonal_pairs", [])))
        triples = tuple(sorted(_index_tuple(t, 3, n, "internal_triples") for t in data.get("internal_triples", [])))
        completions = []
        for c in data.get("completion_triples", []):
            completions.append(CompletionTriple(_index_tuple(c["pair"], 2, n, "completion pair"), Ray.from_json(c["third"])))
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"malformed configuration: {exc!r}") from exc

    derived = build_configuration(rays, sort=False)
    if set(pairs) != set(derived.orthogonal_pairs):
        raise ConfigurationError("orthogonal_pairs do not match the exact orthogonality of the rays")
    if set(triples) != set(derived.internal_triples):
        raise ConfigurationError("internal_triples do not match the 3-cliques of the orthogonality graph")
    allowed = {c.pair: c.third for c in derived.completion_triples}
    for c in completions:
        if allowed.get(c.pair) != c.third:
            raise ConfigurationError(f"invalid completion triple {c.pair} -> {c.third}")
    return Configuration(
        tuple(rays), derived.orthogonal_pairs, derived.internal_triples, tuple(completions), name=name
    )


def load_configuration(path) -> Configuration:
    with open(path, encoding="utf-8") as fh:
        return configuration_from_json(json.load(fh), name=str(path))


def configuration_to_csv(config: Configuration) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", "x", "y", "z", "x_float", "y_float", "z_float"])
    for i, r in enumerate(config.rays):
        f = r.to_float()
        writer.writerow([i, *(str(c) for c in r.rep), *(f"{v:.17g}" for v in f)])
    return buf.getvalue()
