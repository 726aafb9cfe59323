"""Certified search for 101 functions.

A 101 function assigns 0/1 to every ray so that no orthogonal pair is 0,0
and every internal triple carries exactly one 0. ``search_101`` is a plain
backtracking search with unit propagation. In certify mode it logs a linear
trace that :func:`verify_certificate` replays without trusting the searcher.

Trace steps (one JSON object per line in the certificate file)::

    {"step": "branch", "ray": r, "value": v, "level": L}
    {"step": "propagate", "ray": r, "value": v, "reason": {"edge": [i, j]}}
    {"step": "conflict", "constraint": {"triple": [i, j, k]}}
    {"step": "symmetry", "node": k, "perm": g}
    {"step": "backtrack", "level": L}

Every branch step opens a search node numbered 1, 2, ... in trace order (the
root is node 0). A node is closed by a conflict, by a symmetry step, or by
two complementary branches on the same ray, each followed by a backtrack to
the node's level. A symmetry step closes the current node because permutation
number ``g`` of the certificate header maps the decisions of the already
refuted node ``k`` into the current assignment.
"""
from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

from .config import Configuration

__all__ = [
    "ColoringConstraints",
    "Conflict",
    "CertificateError",
    "UnsatCertificate",
    "SearchResult",
    "build_constraints",
    "propagate",
    "search_101",
    "verify_certificate",
    "certificate_failure",
    "expand_certificate",
    "brute_force_101",
    "is_101_function",
    "render_certificate",
    "wlog_trace",
]

Value = Optional[int]
Constraint = tuple[str, tuple[int, ...]]


class CertificateError(ValueError):
    """Structurally malformed certificate; ``index`` is the offending step."""

    def __init__(self, index: int, message: str) -> None:
        super().__init__(f"step {index}: {message}")
        self.index = index


@dataclass(frozen=True)
class ColoringConstraints:
    n_rays: int
    edges: tuple[tuple[int, int], ...]
    triples: tuple[tuple[int, int, int], ...]

    def __post_init__(self) -> None:
        for kind, items, width in (("edge", self.edges, 2), ("triple", self.triples, 3)):
            if len(set(items)) != len(items):
                raise ValueError(f"duplicate {kind} constraints")
            for item in items:
                if len(item) != width or len(set(item)) != width:
                    raise ValueError(f"malformed {kind} constraint {item}")
                if tuple(sorted(item)) != tuple(item):
                    raise ValueError(f"{kind} constraint {item} is not sorted")
                if not all(0 <= i < self.n_rays for i in item):
                    raise ValueError(f"{kind} constraint {item} out of range for {self.n_rays} rays")
        edge_set = set(self.edges)
        for i, j, k in self.triples:
            if not {(i, j), (i, k), (j, k)} <= edge_set:
                raise ValueError(f"triple {(i, j, k)} is missing one of its edge constraints")

    @classmethod
    def from_sets(cls, n_rays: int, edges: Iterable[Sequence[int]], triples: Iterable[Sequence[int]]) -> ColoringConstraints:
        """Normalize, deduplicate and add the edges implied by each triple."""
        triple_set = {tuple(sorted(t)) for t in triples}
        edge_set = {tuple(sorted(e)) for e in edges}
        for i, j, k in triple_set:
            edge_set |= {(i, j), (i, k), (j, k)}
        return cls(n_rays, tuple(sorted(edge_set)), tuple(sorted(triple_set)))

    @cached_property
    def constraint_hash(self) -> str:
        payload = json.dumps(
            {"n_rays": self.n_rays, "edges": [list(e) for e in self.edges], "triples": [list(t) for t in self.triples]},
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode()).hexdigest()

    @cached_property
    def all_constraints(self) -> tuple[Constraint, ...]:
        return tuple([("edge", e) for e in self.edges] + [("triple", t) for t in self.triples])

    @cached_property
    def _lookup(self) -> dict[str, set]:
        return {"edge": set(self.edges), "triple": set(self.triples)}

    def contains(self, kind: str, members: tuple[int, ...]) -> bool:
        return members in self._lookup.get(kind, ())

    def is_automorphism(self, perm: Sequence[int]) -> bool:
        if sorted(perm) != list(range(self.n_rays)):
            return False
        mapped_edges = {tuple(sorted(perm[i] for i in e)) for e in self.edges}
        mapped_triples = {tuple(sorted(perm[i] for i in t)) for t in self.triples}
        return mapped_edges == self._lookup["edge"] and mapped_triples == self._lookup["triple"]


def build_constraints(config: Configuration) -> ColoringConstraints:
    """All orthogonal pairs as edges, internal triples as exactly-one-0 triples.

    Completion triples contribute only their pair: the outside third ray is
    free, so its triple condition holds whenever the pair is not both 0.
    """
    return ColoringConstraints.from_sets(config.n_rays, config.orthogonal_pairs, config.internal_triples)


@dataclass(frozen=True)
class Conflict:
    kind: str
    members: tuple[int, ...]

    def to_json(self) -> dict:
        return {self.kind: list(self.members)}


def _violated(kind: str, members: tuple[int, ...], values: Sequence[Value]) -> bool:
    vals = [values[i] for i in members]
    zeros = vals.count(0)
    if kind == "edge":
        return zeros == 2
    return zeros >= 2 or vals.count(1) == 3


def _propagate(
    values: list[Value],
    constraints: ColoringConstraints,
    trace: Optional[list[dict]] = None,
    rng: Optional[random.Random] = None,
) -> Optional[Conflict]:
    """Run the three forcing rules to a fixpoint in place; return a conflict if one appears."""
    order = list(constraints.all_constraints)
    changed = True
    while changed:
        changed = False
        if rng is not None:
            rng.shuffle(order)
        for kind, members in order:
            if _violated(kind, members, values):
                if trace is not None:
                    trace.append({"step": "conflict", "constraint": {kind: list(members)}})
                return Conflict(kind, members)
            vals = [values[i] for i in members]
            if None not in vals:
                continue
            if 0 in vals:
                forced = 1  # edge: other end must be 1; triple: the other two must be 1
            elif kind == "triple" and vals.count(1) == 2:
                forced = 0
            else:
                continue
            for i in members:
                if values[i] is None:
                    values[i] = forced
                    changed = True
                    if trace is not None:
                        trace.append({"step": "propagate", "ray": i, "value": forced, "reason": {kind: list(members)}})
    return None


def propagate(assignment: Sequence[Value], constraints: ColoringConstraints, *, rng: Optional[random.Random] = None):
    """Fixpoint of the forcing rules: a new assignment tuple, or a :class:`Conflict`.

    ``rng`` shuffles the rule scan order; the fixpoint does not depend on it.
    """
    if len(assignment) != constraints.n_rays:
        raise ValueError(f"assignment has {len(assignment)} entries, expected {constraints.n_rays}")
    values = list(assignment)
    conflict = _propagate(values, constraints, rng=rng)
    return conflict if conflict is not None else tuple(values)


@dataclass
class UnsatCertificate:
    constraints_hash: str
    n_rays: int
    steps: list[dict]
    symmetries: list[tuple[int, ...]] = field(default_factory=list)

    def header(self) -> dict:
        return {
            "format": "ks-unsat-certificate",
            "version": 1,
            "constraints_hash": self.constraints_hash,
            "n_rays": self.n_rays,
            "symmetries": [list(p) for p in self.symmetries],
        }

    def to_jsonl(self) -> str:
        lines = [json.dumps(self.header(), separators=(",", ":"))]
        lines += [json.dumps(s, separators=(",", ":")) for s in self.steps]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> UnsatCertificate:
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise CertificateError(0, "empty certificate file")
        try:
            header = json.loads(lines[0])
            if header.get("format") != "ks-unsat-certificate":
                raise CertificateError(0, "not a ks-unsat-certificate header")
            steps = []
            for idx, line in enumerate(lines[1:]):
                try:
                    steps.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise CertificateError(idx, f"invalid JSON: {exc}") from exc
            return cls(
                constraints_hash=header["constraints_hash"],
                n_rays=header["n_rays"],
                steps=steps,
                symmetries=[tuple(p) for p in header.get("symmetries", [])],
            )
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise CertificateError(0, f"malformed header: {exc!r}") from exc

    def count(self, kind: str) -> int:
        return sum(1 for s in self.steps if s.get("step") == kind)


@dataclass
class SearchResult:
    status: str  # "SAT" or "UNSAT"
    model: Optional[tuple[int, ...]] = None
    certificate: Optional[UnsatCertificate] = None
    nodes: int = 0

    @property
    def satisfiable(self) -> bool:
        return self.status == "SAT"


class _Search:
    def __init__(self, constraints: ColoringConstraints, certify: bool, symmetries: Sequence[Sequence[int]] = ()):
        self.constraints = constraints
        self.trace: Optional[list[dict]] = [] if certify else None
        self.symmetries = [tuple(p) for p in symmetries]
        self.refuted: list[tuple[int, tuple[tuple[int, int], ...]]] = []
        self.nodes = 0
        self.branch_count = 0
        self.model: Optional[tuple[int, ...]] = None

    def _emit(self, step: dict) -> None:
        if self.trace is not None:
            self.trace.append(step)

    def _subsumed(self, values: list[Value]) -> Optional[tuple[int, int]]:
        for node, decisions in self.refuted:
            for g, perm in enumerate(self.symmetries):
                if all(values[perm[r]] == v for r, v in decisions):
                    return node, g
        return None

    def _try_symmetry(self, values: list[Value], node: int, decisions) -> bool:
        if not self.symmetries:
            return False
        hit = self._subsumed(values)
        if hit is None:
            return False
        self._emit({"step": "symmetry", "node": hit[0], "perm": hit[1]})
        self.refuted.append((node, decisions))
        return True

    def run(self, values: list[Value], depth: int = 0, node: int = 0, decisions=()) -> bool:
        """True if a model was found below this node; otherwise the node is refuted."""
        self.nodes += 1
        if depth and self._try_symmetry(values, node, decisions):
            return False
        if _propagate(values, self.constraints, self.trace) is not None:
            self.refuted.append((node, decisions))
            return False
        if depth and self._try_symmetry(values, node, decisions):
            return False
        free = next((i for i, v in enumerate(values) if v is None), None)
        if free is None:
            self.model = tuple(values)
            return True
        for value in (1, 0):
            self.branch_count += 1
            child = self.branch_count
            self._emit({"step": "branch", "ray": free, "value": value, "level": depth + 1})
            child_values = list(values)
            child_values[free] = value
            if self.run(child_values, depth + 1, child, decisions + ((free, value),)):
                return True
            self._emit({"step": "backtrack", "level": depth})
        self.refuted.append((node, decisions))
        return False


def search_101(
    constraints: ColoringConstraints,
    mode: str = "decide",
    *,
    symmetries: Sequence[Sequence[int]] = (),
) -> SearchResult:
    """Complete search for a 101 function.

    Branches on the lowest-index unassigned ray, value 1 first. With
    ``symmetries`` (automorphisms of the constraint set, as index
    permutations) a node is skipped when it extends the image of an already
    refuted node.
    """
    if mode not in ("decide", "certify"):
        raise ValueError(f"mode must be 'decide' or 'certify', got {mode!r}")
    for perm in symmetries:
        if not constraints.is_automorphism(perm):
            raise ValueError("symmetry permutation is not an automorphism of the constraints")
    search = _Search(constraints, mode == "certify", symmetries)
    if search.run([None] * constraints.n_rays):
        return SearchResult("SAT", model=search.model, nodes=search.nodes)
    cert = None
    if search.trace is not None:
        cert = UnsatCertificate(constraints.constraint_hash, constraints.n_rays, search.trace, list(search.symmetries))
    return SearchResult("UNSAT", certificate=cert, nodes=search.nodes)


def wlog_trace(config: Configuration) -> UnsatCertificate:
    """Refutation whose symmetric cases are dismissed as "without loss of generality".

    Uses the configuration's signed coordinate permutations; the result is
    still checkable by :func:`verify_certificate`, and by plain replay after
    :func:`expand_certificate`.
    """
    from .config import symmetry_group

    constraints = build_constraints(config)
    perms = [g.permutation for g in symmetry_group(config)]
    result = search_101(constraints, "certify", symmetries=perms)
    if result.satisfiable:
        raise ValueError("configuration admits a 101 function; there is nothing to refute")
    return result.certificate


# ------------------------------------------------------------------ checker


class _Reject(Exception):
    pass


def _require(step: dict, index: int, key: str, kind=int):
    if key not in step:
        raise CertificateError(index, f"missing field {key!r}")
    value = step[key]
    if kind is int and (not isinstance(value, int) or isinstance(value, bool)):
        raise CertificateError(index, f"field {key!r} must be an integer")
    return value


def _parse_constraint(raw, index: int) -> Constraint:
    if not isinstance(raw, dict) or len(raw) != 1:
        raise CertificateError(index, "constraint must be a single-key object")
    (kind, members), = raw.items()
    if kind not in ("edge", "triple") or not isinstance(members, list):
        raise CertificateError(index, f"unknown constraint {raw!r}")
    if not all(isinstance(m, int) for m in members):
        raise CertificateError(index, "constraint members must be integers")
    return kind, tuple(members)


class _Checker:
    """Independent replay of a certificate; shares no code with the searcher."""

    STEP_KINDS = ("branch", "propagate", "conflict", "symmetry", "backtrack")

    def __init__(self, cert: UnsatCertificate, constraints: ColoringConstraints):
        self.steps = cert.steps
        self.c = constraints
        self.perms = cert.symmetries
        self.closed: dict[int, tuple[tuple[int, int], ...]] = {}
        self.next_node = 1

    def step(self, pos: int) -> dict:
        if pos >= len(self.steps):
            raise _Reject(f"trace ends before the search tree is closed (step {pos})")
        s = self.steps[pos]
        if not isinstance(s, dict) or s.get("step") not in self.STEP_KINDS:
            raise CertificateError(pos, f"unknown step {s!r}")
        return s

    def ray(self, s: dict, pos: int) -> int:
        r = _require(s, pos, "ray")
        if not 0 <= r < self.c.n_rays:
            raise CertificateError(pos, f"ray {r} out of range")
        v = _require(s, pos, "value")
        if v not in (0, 1):
            raise CertificateError(pos, f"value {v} is not 0 or 1")
        return r

    def node(self, pos: int, values: list[Value], decisions, depth: int, node_id: int) -> int:
        s = self.step(pos)
        while s["step"] == "propagate":
            r = self.ray(s, pos)
            kind, members = _parse_constraint(s.get("reason"), pos)
            if not self.c.contains(kind, members) or r not in members:
                raise _Reject(f"step {pos}: reason {kind} {members} is not a constraint on ray {r}")
            if values[r] is not None:
                raise _Reject(f"step {pos}: ray {r} is already assigned")
            others = [values[i] for i in members if i != r]
            if 0 in others:
                justified = 1
            elif kind == "triple" and others == [1, 1]:
                justified = 0
            else:
                justified = None
            if justified != s["value"]:
                raise _Reject(f"step {pos}: {kind} {members} does not force ray {r} = {s['value']}")
            values[r] = s["value"]
            pos += 1
            s = self.step(pos)

        kind = s["step"]
        if kind == "conflict":
            ckind, members = _parse_constraint(s.get("constraint"), pos)
            if not self.c.contains(ckind, members):
                raise _Reject(f"step {pos}: {ckind} {members} is not a constraint")
            if not _violated(ckind, members, values):
                raise _Reject(f"step {pos}: {ckind} {members} is not violated")
            self.closed[node_id] = decisions
            return pos + 1

        if kind == "symmetry":
            ref = _require(s, pos, "node")
            g = _require(s, pos, "perm")
            if ref not in self.closed:
                raise _Reject(f"step {pos}: node {ref} has not been refuted")
            if not 0 <= g < len(self.perms):
                raise _Reject(f"step {pos}: no symmetry number {g}")
            perm = self.perms[g]
            if not all(values[perm[r]] == v for r, v in self.closed[ref]):
                raise _Reject(f"step {pos}: image of node {ref} under symmetry {g} is not contained here")
            self.closed[node_id] = decisions
            return pos + 1

        if kind != "branch":
            raise _Reject(f"step {pos}: expected propagate, conflict, symmetry or branch, got {kind}")
        r = self.ray(s, pos)
        if values[r] is not None:
            raise _Reject(f"step {pos}: branch on assigned ray {r}")
        first = s["value"]
        for value in (first, 1 - first):
            s = self.step(pos)
            if s["step"] != "branch" or self.ray(s, pos) != r or s["value"] != value:
                raise _Reject(f"step {pos}: expected branch on ray {r} = {value}")
            if _require(s, pos, "level") != depth + 1:
                raise _Reject(f"step {pos}: branch level {s['level']} should be {depth + 1}")
            child_id = self.next_node
            self.next_node += 1
            child_values = list(values)
            child_values[r] = value
            pos = self.node(pos + 1, child_values, decisions + ((r, value),), depth + 1, child_id)
            s = self.step(pos)
            if s["step"] != "backtrack" or _require(s, pos, "level") != depth:
                raise _Reject(f"step {pos}: expected backtrack to level {depth}")
            pos += 1
        self.closed[node_id] = decisions
        return pos

    def run(self) -> None:
        for g, perm in enumerate(self.perms):
            if not self.c.is_automorphism(perm):
                raise _Reject(f"header symmetry {g} is not an automorphism of the constraints")
        end = self.node(0, [None] * self.c.n_rays, (), 0, 0)
        if end != len(self.steps):
            raise _Reject(f"trailing steps after the root was refuted (step {end})")


def certificate_failure(certificate: UnsatCertificate, constraints: ColoringConstraints) -> Optional[str]:
    """Why the certificate does not refute ``constraints``, or None if it does.

    Raises :class:`CertificateError` for structurally malformed traces.
    """
    if certificate.constraints_hash != constraints.constraint_hash:
        return "certificate was issued for a different constraint set"
    if certificate.n_rays != constraints.n_rays:
        return "ray count mismatch"
    try:
        _Checker(certificate, constraints).run()
    except _Reject as exc:
        return str(exc)
    except RecursionError:
        return "trace nesting too deep"
    return None


def verify_certificate(certificate: UnsatCertificate, constraints: ColoringConstraints) -> bool:
    return certificate_failure(certificate, constraints) is None


def expand_certificate(certificate: UnsatCertificate, constraints: ColoringConstraints) -> UnsatCertificate:
    """Replace every symmetry step by an explicit refutation of that node.

    The result carries no symmetries and is checkable by plain replay.
    """
    steps: list[dict] = []
    values: list[Value] = [None] * constraints.n_rays
    snapshots: dict[int, list[Value]] = {}
    depth = 0
    for s in certificate.steps:
        kind = s["step"]
        if kind == "symmetry":
            sub = _Search(constraints, certify=True)
            if sub.run(list(values), depth):
                raise ValueError("symmetry step closes a satisfiable node")
            steps.extend(sub.trace)
            continue
        steps.append(dict(s))
        if kind == "branch":
            snapshots[s["level"] - 1] = list(values)
            values[s["ray"]] = s["value"]
            depth = s["level"]
        elif kind == "propagate":
            values[s["ray"]] = s["value"]
        elif kind == "backtrack":
            depth = s["level"]
            values = list(snapshots[depth])
    return UnsatCertificate(certificate.constraints_hash, certificate.n_rays, steps, [])


# ------------------------------------------------------------------- oracle


def is_101_function(values: Sequence[int], constraints: ColoringConstraints) -> bool:
    if len(values) != constraints.n_rays or any(v not in (0, 1) for v in values):
        return False
    return not any(_violated(kind, m, values) for kind, m in constraints.all_constraints) and all(
        [values[i] for i in t].count(0) == 1 for t in constraints.triples
    )


def brute_force_101(constraints: ColoringConstraints) -> Optional[tuple[int, ...]]:
    """Exhaustive enumeration of all 2^n total assignments (n <= 30)."""
    from . import _kernels

    mask = _kernels.first_satisfying_mask(constraints.n_rays, constraints.edges, constraints.triples)
    if mask < 0:
        return None
    return tuple((mask >> i) & 1 for i in range(constraints.n_rays))


def render_certificate(certificate: UnsatCertificate, labels: Optional[Sequence[str]] = None) -> str:
    """Indented, human-readable rendering ("odd" = 1, "even" = 0)."""
    name = (lambda i: labels[i]) if labels else (lambda i: f"r{i}")
    parity = {1: "odd", 0: "even"}
    out = []
    depth = 0
    for s in certificate.steps:
        pad = "  " * depth
        kind = s["step"]
        if kind == "branch":
            out.append(f"{'  ' * (s['level'] - 1)}case {name(s['ray'])} {parity[s['value']]}")
            depth = s["level"]
        elif kind == "propagate":
            (ck, members), = s["reason"].items()
            out.append(f"{pad}{name(s['ray'])} {parity[s['value']]}  [{ck} {', '.join(map(name, members))}]")
        elif kind == "conflict":
            (ck, members), = s["constraint"].items()
            out.append(f"{pad}contradiction: {ck} {', '.join(map(name, members))}")
        elif kind == "symmetry":
            out.append(f"{pad}w.l.o.g.: symmetric image of refuted case #{s['node']} (symmetry {s['perm']})")
        elif kind == "backtrack":
            depth = s["level"]
    return "\n".join(out)
