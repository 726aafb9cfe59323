"""Acceptance criteria 1-9; each test records one PASS/FAIL line."""
import time

import numpy as np
import pytest

from ksverify.cli import main
from ksverify.config import build_peres_configuration, quadruple_count, symmetry_group
from ksverify.fwt import STRATEGIES, derandomization_report, fwt_reduction_check, generate_tapes
from ksverify.quantum import (
    A_OUTCOMES,
    joint_distribution,
    random_orthonormal_triple,
    sample_run,
    twin_disagreement,
    verify_spin_axiom,
)
from ksverify.solver import build_constraints, search_101, verify_certificate, wlog_trace

from corpus import peres_subconfigurations, python_bruteforce, synthetic_systems

pytestmark = pytest.mark.acceptance

SEED = 20240601


def _triple_floats(config, t):
    return np.array([r.to_float() for r in config.triple_rays(t)])


def test_criterion_1_configuration_counts(criterion):
    start = time.perf_counter()
    config = build_peres_configuration()
    elapsed = time.perf_counter() - start
    counts = (
        config.n_rays,
        len(config.orthogonal_pairs),
        len(config.internal_triples),
        len(config.completion_triples),
        config.n_triples,
        quadruple_count(config),
    )
    ok = counts == (33, 72, 16, 24, 40, 1320) and elapsed < 1.0
    criterion(1, ok, f"rays/pairs/internal/completion/triples/quadruples = {counts}, built in {elapsed:.3f}s")


def test_criterion_2_ks_paradox(criterion, peres, peres_constraints):
    start = time.perf_counter()
    plain = search_101(peres_constraints, mode="certify")
    pruned = wlog_trace(peres)
    elapsed = time.perf_counter() - start
    plain_ok = plain.status == "UNSAT" and verify_certificate(plain.certificate, peres_constraints)
    pruned_ok = verify_certificate(pruned, peres_constraints) and pruned.count("symmetry") > 0
    shorter = len(pruned.steps) < len(plain.certificate.steps)
    ok = plain_ok and pruned_ok and shorter and elapsed < 5.0
    criterion(
        2,
        ok,
        f"UNSAT, certificate verified={plain_ok}, trace {len(plain.certificate.steps)} steps; "
        f"with {len({s.permutation for s in symmetry_group(peres)})} symmetry permutations verified={pruned_ok}, {len(pruned.steps)} steps; {elapsed:.2f}s",
    )


def test_criterion_3_solver_matches_bruteforce(criterion, peres):
    systems = peres_subconfigurations(peres, 150, SEED) + synthetic_systems(150, SEED)
    assert all(c.n_rays <= 20 for c in systems)
    mismatches, sat = 0, 0
    for c in systems:
        verdict = search_101(c).status
        oracle = "UNSAT" if python_bruteforce(c) is None else "SAT"
        mismatches += verdict != oracle
        sat += oracle == "SAT"
    ok = len(systems) >= 200 and mismatches == 0 and 0 < sat < len(systems)
    criterion(3, ok, f"{len(systems)} systems ({sat} SAT, {len(systems) - sat} UNSAT), {mismatches} disagreements")


def test_criterion_4_fwt_reduction(criterion, peres, peres_constraints):
    report = fwt_reduction_check(peres)
    same = report.reduction_hash == peres_constraints.constraint_hash
    ok = report.status == "UNSAT" and same
    criterion(4, ok, f"reduction {report.status}, target hash {report.reduction_hash[:16]} equals KS hash: {same}")


def test_criterion_5_spin_identities(criterion, peres):
    reports = [verify_spin_axiom(_triple_floats(peres, t)) for t in range(peres.n_triples)]
    comm = max(r.max_commutator for r in reports)
    total = max(r.sum_deviation for r in reports)
    spec = max(r.spectrum_deviation for r in reports)
    ok = len(reports) == 40 and comm < 1e-12 and total < 1e-12 and spec < 1e-10 and all(r.passed for r in reports)
    criterion(5, ok, f"{len(reports)} triples, max commutator {comm:.1e}, sum dev {total:.1e}, spectrum dev {spec:.1e}")


def test_criterion_6_twin_exactness(criterion, peres):
    worst, disagreements, pairs = 0.0, 0, 0
    for t in range(peres.n_triples):
        triple = _triple_floats(peres, t)
        for k in range(3):
            pairs += 1
            worst = max(worst, twin_disagreement(joint_distribution(triple, triple[k]), k))
            run = sample_run(triple, triple[k], 100_000, SEED + pairs)
            disagreements += run.n - run.agreements(k)
    ok = pairs == 120 and worst < 1e-12 and disagreements == 0
    criterion(6, ok, f"{pairs} pairs, max exact disagreement {worst:.1e}, Monte Carlo disagreements {disagreements}")


def test_criterion_7_born_marginals(criterion):
    rng = np.random.default_rng(SEED)
    worst_exact, outside = 0.0, 0
    for i in range(50):
        w = rng.standard_normal(3)
        w /= np.linalg.norm(w)
        triple = random_orthonormal_triple(rng)
        run = sample_run(triple, w, 100_000, SEED + i)
        p0 = run.exact.marginal_b()[0]
        worst_exact = max(worst_exact, abs(p0 - 1 / 3))
        sigma = np.sqrt(p0 * (1 - p0) / run.n)
        outside += abs(run.b_zero_frequency() - p0) > 3 * sigma
    ok = worst_exact < 1e-12 and outside == 0
    criterion(7, ok, f"50 directions, max |P(b=0) - 1/3| = {worst_exact:.1e}, {outside} outside 3 sigma")


def test_criterion_8_derandomization(criterion, peres):
    stochastic = [s for name, s in sorted(STRATEGIES.items()) if name != "constant"]
    tapes = generate_tapes(quadruple_count(peres), 128, SEED)
    found = {}
    for strategy in stochastic:
        report = derandomization_report(peres, tapes, strategy, 128)
        v = report.first_violation
        found[strategy.name] = None if v is None else f"q{v.quadruple}:{v.kind}"
    ok = len(stochastic) == 10 and all(found.values())
    detail = ", ".join(f"{k}->{v}" for k, v in found.items())
    criterion(8, ok, f"{len(stochastic)} strategies, first violations: {detail}")


CLI_COMMANDS = [
    ["generate"],
    ["generate", "--format", "csv"],
    ["generate", "--format", "text"],
    ["verify"],
    ["verify", "--certify", "--certificate", "{dir}/cert.jsonl"],
    ["verify", "--certify", "--wlog", "--certificate", "{dir}/wlog.jsonl", "--format", "text"],
    ["fwt"],
    ["fwt", "--format", "text"],
    ["fwt", "--derandomize", "--strategy", "born_sampler", "--write-tapes", "{dir}/tapes.json"],
    ["twin", "--n", "20000", "--log", "{dir}/twin.csv"],
    ["twin", "--n", "20000", "--w", "5", "--format", "csv"],
    ["perturb", "--trials", "20"],
    ["perturb", "--trials", "20", "--workers", "2", "--format", "text"],
]


def _run_all(directory, capsysbinary):
    outputs = {}
    for i, argv in enumerate(CLI_COMMANDS):
        args = [a.format(dir=directory) for a in argv] + ["--seed", "7", "--no-timestamp"]
        code = main(args)
        outputs[f"stdout:{i}"] = (code, capsysbinary.readouterr().out)
    for path in sorted(directory.iterdir()):
        outputs[path.name] = path.read_bytes()
    return outputs


def test_criterion_9_reproducibility(criterion, tmp_path, capsysbinary):
    first, second = tmp_path / "a", tmp_path / "b"
    first.mkdir()
    second.mkdir()
    a = _run_all(first, capsysbinary)
    b = _run_all(second, capsysbinary)
    # file paths appear in some reports; normalize the directory name only
    b = {k: (v[0], v[1].replace(bytes(second), bytes(first))) if isinstance(v, tuple) else v for k, v in b.items()}
    differing = [k for k in a if a[k] != b.get(k)]
    codes_ok = all(v[0] == 0 for k, v in a.items() if k.startswith("stdout"))
    ok = a.keys() == b.keys() and not differing and codes_ok
    criterion(9, ok, f"{len(CLI_COMMANDS)} commands and {len(a) - len(CLI_COMMANDS)} written files byte-identical; differing: {differing or 'none'}")
