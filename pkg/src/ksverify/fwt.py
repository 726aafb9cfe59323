"""The free-will reduction and the derandomization of stochastic responses.

Quadruples are the 40 x 33 joint settings (triple t for A, ray w for B),
numbered ``q = t * n_rays + w + 1`` so the Peres configuration runs over
1..1320. Triples are numbered internal-first, as in
:meth:`Configuration.triple_members`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .config import Configuration
from .quantum import A_OUTCOMES, CELLS, joint_distribution
from .solver import ColoringConstraints, SearchResult, _propagate, build_constraints, search_101

__all__ = [
    "SPIN_OUTCOMES",
    "ResponseTables",
    "Violation",
    "FwtReport",
    "Tape",
    "TapeExhausted",
    "Strategy",
    "STRATEGIES",
    "DerandomizationReport",
    "quadruple_index",
    "quadruple_settings",
    "twin_equations",
    "reduction_constraints",
    "tables_from_coloring",
    "check_response_tables",
    "fwt_reduction_check",
    "generate_tapes",
    "tapes_to_json",
    "tapes_from_json",
    "evaluate_quadruples",
    "derandomize",
    "derandomization_report",
    "coloring_strategy",
]

SPIN_OUTCOMES = frozenset(A_OUTCOMES)


def quadruple_index(config: Configuration, triple: int, w: int) -> int:
    return triple * config.n_rays + w + 1


def quadruple_settings(config: Configuration, q: int) -> tuple[int, int]:
    return divmod(q - 1, config.n_rays)


def twin_equations(config: Configuration, quadruples: Optional[Iterable[tuple[int, int]]] = None) -> list[tuple[int, int]]:
    """Quadruples (t, w) in which w is one of the triple's in-set members."""
    if quadruples is None:
        quadruples = ((t, w) for t in range(config.n_triples) for w in range(config.n_rays))
    return sorted((t, w) for t, w in set(quadruples) if w in config.triple_members(t))


@dataclass(frozen=True)
class ResponseTables:
    """theta1: A's answer for each triple; theta0: B's answer for each ray.

    An entry of theta1 outside the three SPIN outcomes is kept as given so
    the checker can report it as a SPIN violation.
    """

    theta1: tuple[tuple[int, int, int], ...]
    theta0: tuple[int, ...]

    def to_json(self) -> dict:
        return {"theta1": [list(a) for a in self.theta1], "theta0": list(self.theta0)}


@dataclass(frozen=True)
class Violation:
    quadruple: int
    triple: int
    w: int
    kind: str  # "SPIN" or "TWIN"
    detail: str

    def to_json(self) -> dict:
        return {"quadruple": self.quadruple, "triple": self.triple, "w": self.w, "kind": self.kind, "detail": self.detail}


def check_response_tables(config: Configuration, tables: ResponseTables) -> list[Violation]:
    """All SPIN and TWIN violations of a pair of response tables.

    A SPIN violation is reported at the quadruple of the triple's first
    member; TWIN is checked at every quadruple whose w belongs to the triple.
    """
    if len(tables.theta1) != config.n_triples or len(tables.theta0) != config.n_rays:
        raise ValueError("response tables do not match the configuration size")
    out = []
    for t in range(config.n_triples):
        answer = tuple(tables.theta1[t])
        members = config.triple_members(t)
        if answer not in SPIN_OUTCOMES:
            w = members[0]
            out.append(Violation(quadruple_index(config, t, w), t, w, "SPIN", f"A answered {answer} on triple {t}"))
        for pos, w in enumerate(members):
            if answer[pos] != tables.theta0[w]:
                out.append(
                    Violation(
                        quadruple_index(config, t, w),
                        t,
                        w,
                        "TWIN",
                        f"A's component {answer[pos]} at ray {w} in triple {t}, B answered {tables.theta0[w]}",
                    )
                )
    return sorted(out, key=lambda v: (v.quadruple, v.kind))


def tables_from_coloring(config: Configuration, theta0: Sequence[int]) -> ResponseTables:
    """The only tables TWIN allows once B's answers are fixed.

    On an internal triple A must repeat theta0; on a completion triple the
    outside third component is 0 exactly when both pair members are 1.
    """
    theta1 = []
    for t in range(config.n_triples):
        members = config.triple_members(t)
        vals = [int(theta0[i]) for i in members]
        if len(vals) == 2:
            vals.append(0 if vals == [1, 1] else 1)
        theta1.append(tuple(vals))
    return ResponseTables(tuple(theta1), tuple(int(v) for v in theta0))


def reduction_constraints(config: Configuration, quadruples: Optional[Iterable[tuple[int, int]]] = None) -> ColoringConstraints:
    """Eliminate theta1 from the TWIN equations plus the SPIN codomain.

    For each triple, the components bound to theta0 by a TWIN equation must
    admit a completion by the free components to exactly one 0: all three
    bound gives an exactly-one-0 triple; two bound gives a not-both-0 edge.
    """
    bound: dict[int, list[int]] = {}
    for t, w in twin_equations(config, quadruples):
        bound.setdefault(t, []).append(w)
    edges, triples = [], []
    for members in bound.values():
        if len(members) == 3:
            triples.append(members)
        if len(members) >= 2:
            edges += [(a, b) for i, a in enumerate(members) for b in members[i + 1:]]
    return ColoringConstraints.from_sets(config.n_rays, edges, triples)


@dataclass
class FwtReport:
    n_triples: int
    n_rays: int
    quadruple_count: int
    twin_equation_count: int
    constraints: ColoringConstraints
    matches_kochen_specker: bool
    result: SearchResult
    tables: Optional[ResponseTables] = None
    table_violations: list[Violation] = field(default_factory=list)

    @property
    def status(self) -> str:
        return self.result.status

    @property
    def reduction_hash(self) -> str:
        return self.constraints.constraint_hash

    def narrative(self) -> list[str]:
        lines = [
            f"{self.n_triples} triples x {self.n_rays} directions = {self.quadruple_count} quadruples",
            f"{self.twin_equation_count} quadruples have w among the triple's members; TWIN equates A's component there with B's answer",
            "SPIN restricts each triple answer to (0,1,1), (1,0,1), (1,1,0)",
            f"eliminating theta1 leaves {len(self.constraints.edges)} not-both-0 pairs and "
            f"{len(self.constraints.triples)} exactly-one-0 triples on theta0: theta0 must be a 101 function",
            f"reduction target {'equals' if self.matches_kochen_specker else 'differs from'} the Kochen-Specker constraint set",
        ]
        if self.status == "UNSAT":
            lines.append("no 101 function exists, so no response tables satisfy SPIN and TWIN: UNSAT")
        else:
            lines.append(f"101 function found: theta0 = {list(self.result.model)}; theta1 follows from it: SAT")
        return lines

    def to_json(self) -> dict:
        out = {
            "status": self.status,
            "n_triples": self.n_triples,
            "n_rays": self.n_rays,
            "quadruple_count": self.quadruple_count,
            "twin_equation_count": self.twin_equation_count,
            "reduction_target": {
                "n_edges": len(self.constraints.edges),
                "n_triples": len(self.constraints.triples),
                "hash": self.reduction_hash,
                "matches_kochen_specker_constraints": self.matches_kochen_specker,
            },
            "narrative": self.narrative(),
        }
        if self.tables is not None:
            out["tables"] = self.tables.to_json()
        if self.table_violations:
            out["violations"] = [v.to_json() for v in self.table_violations]
        return out


def fwt_reduction_check(
    config: Configuration,
    quadruples: Optional[Iterable[tuple[int, int]]] = None,
    *,
    certify: bool = False,
) -> FwtReport:
    """Decide whether any (theta1, theta0) satisfies SPIN and TWIN on the quadruples."""
    quads = None if quadruples is None else list(quadruples)
    constraints = reduction_constraints(config, quads)
    result = search_101(constraints, "certify" if certify else "decide")
    report = FwtReport(
        n_triples=config.n_triples,
        n_rays=config.n_rays,
        quadruple_count=config.n_triples * config.n_rays if quads is None else len(set(quads)),
        twin_equation_count=len(twin_equations(config, quads)),
        constraints=constraints,
        matches_kochen_specker=constraints.constraint_hash == build_constraints(config).constraint_hash,
        result=result,
    )
    if result.satisfiable:
        report.tables = tables_from_coloring(config, result.model)
        report.table_violations = check_response_tables(config, report.tables)
        if quads is None and report.table_violations:
            raise AssertionError("tables built from a 101 function violate SPIN/TWIN")
    return report


# ----------------------------------------------------------- derandomization


class TapeExhausted(ValueError):
    """A strategy asked for more random bits than the tape budget allows."""


class Tape:
    """Sequential reader over a pre-given random bit sequence."""

    def __init__(self, bits: np.ndarray, budget: int) -> None:
        self._bits = bits
        self._limit = min(budget, len(bits))
        self.position = 0

    def bit(self) -> int:
        if self.position >= self._limit:
            raise TapeExhausted(f"tape exhausted after {self.position} draws")
        b = int(self._bits[self.position])
        self.position += 1
        return b

    def bits(self, k: int) -> int:
        value = 0
        for _ in range(k):
            value = (value << 1) | self.bit()
        return value

    def uniform(self, k: int = 24) -> float:
        return self.bits(k) / float(1 << k)

    def choice(self, m: int) -> int:
        return min(int(self.uniform() * m), m - 1)


Respond = Callable[[Configuration, int, int, Tape], tuple[tuple[int, ...], int]]


@dataclass(frozen=True)
class Strategy:
    name: str
    respond: Respond
    description: str = ""


def generate_tapes(n_quadruples: int, length: int, seed: int) -> dict[int, np.ndarray]:
    rng = np.random.Generator(np.random.PCG64(seed))
    block = rng.integers(0, 2, size=(n_quadruples, length), dtype=np.uint8)
    return {q + 1: block[q] for q in range(n_quadruples)}


def tapes_to_json(tapes: dict[int, np.ndarray]) -> dict:
    return {
        "format": "ks-tapes",
        "version": 1,
        "tapes": {str(q): "".join(map(str, tapes[q].tolist())) for q in sorted(tapes)},
    }


def tapes_from_json(data: dict) -> dict[int, np.ndarray]:
    if data.get("format") != "ks-tapes":
        raise ValueError("not a ks-tapes document")
    tapes = {}
    for key, bits in data["tapes"].items():
        if set(bits) - {"0", "1"}:
            raise ValueError(f"tape {key} contains characters other than 0 and 1")
        tapes[int(key)] = np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")
    return tapes


def evaluate_quadruples(
    config: Configuration, tapes: dict[int, np.ndarray], strategy: Strategy, draw_budget: int
) -> dict[int, tuple[tuple[int, ...], int]]:
    """Run the strategy once per quadruple, reading only that quadruple's tape."""
    n_quads = config.n_triples * config.n_rays
    for q in range(1, n_quads + 1):
        if q not in tapes:
            raise ValueError(f"no tape given for quadruple {q}")
        if len(tapes[q]) < draw_budget:
            raise ValueError(f"tape for quadruple {q} has {len(tapes[q])} bits, budget is {draw_budget}")
    responses = {}
    for q in range(1, n_quads + 1):
        t, w = quadruple_settings(config, q)
        a, b = strategy.respond(config, t, w, Tape(tapes[q], draw_budget))
        responses[q] = (tuple(int(x) for x in a), int(b))
    return responses


def derandomize(
    config: Configuration, tapes: dict[int, np.ndarray], strategy: Strategy, draw_budget: int
) -> ResponseTables:
    """Fix all randomness in advance and read off deterministic response tables.

    With every tape given, the strategy is an ordinary function of the
    settings. A's table is read at the reference setting w = ray 0 and B's
    at the reference setting triple 0; a local strategy gives the same
    tables for any reference choice.
    """
    return _reference_tables(config, evaluate_quadruples(config, tapes, strategy, draw_budget))


def _reference_tables(config: Configuration, responses: dict) -> ResponseTables:
    theta1 = tuple(responses[quadruple_index(config, t, 0)][0] for t in range(config.n_triples))
    theta0 = tuple(responses[quadruple_index(config, 0, w)][1] for w in range(config.n_rays))
    return ResponseTables(theta1, theta0)


@dataclass
class DerandomizationReport:
    strategy: str
    draw_budget: int
    tables: ResponseTables
    violations: list[Violation]
    direct_violations: list[Violation]
    a_depends_on_w: int
    b_depends_on_triple: int

    @property
    def first_violation(self) -> Optional[Violation]:
        return self.violations[0] if self.violations else None

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy,
            "draw_budget": self.draw_budget,
            "violation_count": len(self.violations),
            "first_violation": None if self.first_violation is None else self.first_violation.to_json(),
            "direct_violation_count": len(self.direct_violations),
            "first_direct_violation": self.direct_violations[0].to_json() if self.direct_violations else None,
            "triples_where_a_depends_on_w": self.a_depends_on_w,
            "rays_where_b_depends_on_triple": self.b_depends_on_triple,
            "tables": self.tables.to_json(),
        }


def derandomization_report(
    config: Configuration, tapes: dict[int, np.ndarray], strategy: Strategy, draw_budget: int
) -> DerandomizationReport:
    responses = evaluate_quadruples(config, tapes, strategy, draw_budget)
    tables = _reference_tables(config, responses)

    direct = []
    for q, (a, b) in responses.items():
        t, w = quadruple_settings(config, q)
        members = config.triple_members(t)
        if a not in SPIN_OUTCOMES:
            direct.append(Violation(q, t, w, "SPIN", f"A answered {a} on triple {t}"))
        elif w in members and a[members.index(w)] != b:
            direct.append(Violation(q, t, w, "TWIN", f"A's component {a[members.index(w)]} at ray {w}, B answered {b}"))

    a_nonlocal = sum(
        len({responses[quadruple_index(config, t, w)][0] for w in range(config.n_rays)}) > 1
        for t in range(config.n_triples)
    )
    b_nonlocal = sum(
        len({responses[quadruple_index(config, t, w)][1] for t in range(config.n_triples)}) > 1
        for w in range(config.n_rays)
    )
    return DerandomizationReport(
        strategy=strategy.name,
        draw_budget=draw_budget,
        tables=tables,
        violations=check_response_tables(config, tables),
        direct_violations=direct,
        a_depends_on_w=a_nonlocal,
        b_depends_on_triple=b_nonlocal,
    )


# ------------------------------------------------------------ strategies


def _spin_answer(zero_at: int) -> tuple[int, int, int]:
    return A_OUTCOMES[zero_at]


def _constant(config, t, w, tape):
    return (1, 0, 1), 1


def _uniform(config, t, w, tape):
    return _spin_answer(tape.choice(3)), tape.bit()


def _born_marginal(config, t, w, tape):
    return _spin_answer(tape.choice(3)), int(tape.uniform() >= 1 / 3)


_BORN_CACHE: dict = {}


def _born_sampler(config, t, w, tape):
    key = (config.config_hash, t, w)
    if key not in _BORN_CACHE:
        frame = np.array([r.to_float() for r in config.triple_rays(t)])
        dist = joint_distribution(frame, config.rays[w].to_float())
        _BORN_CACHE[key] = np.cumsum(dist.vector())
    cdf = _BORN_CACHE[key]
    cell = min(int(np.searchsorted(cdf, tape.uniform(), side="right")), len(CELLS) - 1)
    a, b = CELLS[cell]
    return a, b


def _project_to_spin(vals: list[int], tape: Tape) -> tuple[int, int, int]:
    """Closest SPIN answer to a raw 0/1 guess: keep a unique 0, else pick one."""
    zeros = [i for i, v in enumerate(vals) if v == 0]
    if len(zeros) == 1:
        return _spin_answer(zeros[0])
    pool = zeros or [0, 1, 2]
    return _spin_answer(pool[tape.choice(len(pool))])


def _triple_guess(config: Configuration, t: int, coloring: Sequence[int], tape: Tape) -> tuple[int, int, int]:
    members = config.triple_members(t)
    vals = [coloring[i] for i in members]
    if len(vals) == 2:
        vals.append(0 if vals == [1, 1] else 1)
    return _project_to_spin(vals, tape)


def _random_coloring(config, t, w, tape):
    coloring = [tape.bit() for _ in range(config.n_rays)]
    return _triple_guess(config, t, coloring, tape), coloring[w]


_GREEDY_CACHE: dict = {}


def _greedy_coloring(config: Configuration, seed: int) -> tuple[int, ...]:
    """Randomized greedy 101 attempt: assign in shuffled order, propagate, undo on conflict."""
    key = (config.config_hash, seed)
    if key in _GREEDY_CACHE:
        return _GREEDY_CACHE[key]
    rng = np.random.Generator(np.random.PCG64(seed))
    constraints = build_constraints(config)
    values: list = [None] * config.n_rays
    for r in rng.permutation(config.n_rays).tolist():
        if values[r] is not None:
            continue
        first = int(rng.integers(2))
        for v in (first, 1 - first):
            trial = list(values)
            trial[r] = v
            if _propagate(trial, constraints) is None:
                values = trial
                break
        else:
            # dead end: keep the guess and carry on
            values[r] = first
    coloring = tuple(1 if v is None else v for v in values)
    _GREEDY_CACHE[key] = coloring
    return coloring


def _greedy_101(config, t, w, tape):
    coloring = _greedy_coloring(config, tape.bits(8))
    return _triple_guess(config, t, coloring, tape), coloring[w]


def _nonlocal_cheater(config, t, w, tape):
    members = config.triple_members(t)
    if w in members:
        return _spin_answer(members.index(w)), 0
    return _spin_answer(tape.choice(3)), 0


def _twin_copy(config, t, w, tape):
    a = _spin_answer(tape.choice(3))
    members = config.triple_members(t)
    if w in members:
        return a, a[members.index(w)]
    return a, tape.bit()


def _spin_breaker(config, t, w, tape):
    if tape.bits(2) == 0:
        return (1, 1, 1), tape.bit()
    return _spin_answer(tape.choice(3)), tape.bit()


def _parity(config, t, w, tape):
    p = bin(tape.bits(4)).count("1")
    return _spin_answer((t + p) % 3), (w + tape.bit()) % 2


def _majority(config, t, w, tape):
    bits = [tape.bit() for _ in range(3)]
    zero_at = bits.index(1) if 1 in bits else 2
    return _spin_answer(zero_at), int(sum(bits) >= 2)


STRATEGIES: dict[str, Strategy] = {
    s.name: s
    for s in [
        Strategy("constant", _constant, "A always (1,0,1), B always 1; reads no bits"),
        Strategy("uniform", _uniform, "uniform SPIN answer for A, fair bit for B"),
        Strategy("born_marginal", _born_marginal, "uniform SPIN answer, B answers 0 with probability 1/3"),
        Strategy("born_sampler", _born_sampler, "exact quantum joint distribution of the quadruple"),
        Strategy("random_coloring", _random_coloring, "fresh random coloring, A projects it onto SPIN"),
        Strategy("greedy_101", _greedy_101, "randomized greedy 101 attempt seeded from the tape"),
        Strategy("nonlocal_cheater", _nonlocal_cheater, "A puts its 0 at w when w is a member; B always 0"),
        Strategy("twin_copy", _twin_copy, "B copies A's component when w is a member"),
        Strategy("spin_breaker", _spin_breaker, "answers (1,1,1) with probability 1/4"),
        Strategy("parity", _parity, "answers from tape parities"),
        Strategy("majority", _majority, "answers from a 3-bit majority vote"),
    ]
}

# every scripted strategy above reads at most this many bits per quadruple
DEFAULT_DRAW_BUDGET = 128


def coloring_strategy(theta0: Sequence[int], name: str = "coloring") -> Strategy:
    """Deterministic local strategy answering from a fixed coloring."""
    theta0 = tuple(int(v) for v in theta0)

    def respond(config, t, w, tape):
        return tables_from_coloring(config, theta0).theta1[t], theta0[w]

    return Strategy(name, respond, "answers from a fixed 0/1 coloring")
