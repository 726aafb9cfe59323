import random

import numpy as np
import pytest

from ksverify.config import build_peres_configuration, symmetry_group
from ksverify.fwt import (
    STRATEGIES,
    ResponseTables,
    Tape,
    TapeExhausted,
    check_response_tables,
    coloring_strategy,
    derandomization_report,
    derandomize,
    fwt_reduction_check,
    generate_tapes,
    quadruple_index,
    quadruple_settings,
    tapes_from_json,
    tapes_to_json,
    twin_equations,
)
from ksverify.solver import build_constraints, search_101

BUDGET = 128


@pytest.fixture(scope="module")
def tapes(peres):
    return generate_tapes(1320, BUDGET, seed=2024)


def test_quadruple_numbering(peres):
    assert quadruple_index(peres, 0, 0) == 1
    assert quadruple_index(peres, 39, 32) == 1320
    for q in (1, 77, 1320):
        assert quadruple_index(peres, *quadruple_settings(peres, q)) == q


def test_twin_equation_count(peres):
    # 16 internal triples x 3 members + 24 completion pairs x 2 members
    assert len(twin_equations(peres)) == 96


def test_peres_reduction_unsat(peres):
    report = fwt_reduction_check(peres)
    assert report.status == "UNSAT"
    assert report.quadruple_count == 1320
    assert report.matches_kochen_specker
    assert report.reduction_hash == build_constraints(peres).constraint_hash
    assert any("1320" in line for line in report.narrative())


def test_toy_reduction_sat(toy):
    report = fwt_reduction_check(toy)
    assert report.status == "SAT"
    by_axis = {tuple(float(c) for c in r.rep): report.tables.theta0[i] for i, r in enumerate(toy.rays)}
    assert (by_axis[(1.0, 0.0, 0.0)], by_axis[(0.0, 1.0, 0.0)], by_axis[(0.0, 0.0, 1.0)]) == (0, 1, 1)
    assert check_response_tables(toy, report.tables) == []


def test_internal_triples_only_recorded():
    weak = build_peres_configuration(include_completions=False)
    report = fwt_reduction_check(weak)
    # recorded: without the 24 completion pairs a 101 function exists
    assert report.status == "SAT"
    assert check_response_tables(weak, report.tables) == []


def test_reduction_unsat_on_orbit_complete_subsets(peres):
    twin = set(twin_equations(peres))
    rest = [(t, w) for t in range(40) for w in range(33) if (t, w) not in twin]
    group = symmetry_group(peres)
    rng = random.Random(3)
    for _ in range(5):
        extra = set(rng.sample(rest, 200))
        report = fwt_reduction_check(peres, twin | extra)
        assert report.status == "UNSAT"
    # dropping one completion pair's equations, and its whole symmetry orbit, weakens the system
    t0, w0 = next((t, w) for t, w in sorted(twin) if t >= 16)
    pair = set(peres.triple_members(t0))
    orbit_pairs = {frozenset(g.permutation[i] for i in pair) for g in group}
    dropped = {(t, w) for t, w in twin if t >= 16 and frozenset(peres.triple_members(t)) in orbit_pairs}
    assert fwt_reduction_check(peres, twin - dropped).constraints.edges != fwt_reduction_check(peres).constraints.edges


def test_constant_strategy_violation(peres, tapes):
    report = derandomization_report(peres, tapes, STRATEGIES["constant"], BUDGET)
    v = report.first_violation
    assert v is not None and v.kind in ("SPIN", "TWIN")
    t, w = quadruple_settings(peres, v.quadruple)
    assert (t, w) == (v.triple, v.w)


@pytest.mark.parametrize("name", sorted(set(STRATEGIES) - {"constant"}))
def test_every_scripted_strategy_is_caught(peres, tapes, name):
    report = derandomization_report(peres, tapes, STRATEGIES[name], BUDGET)
    assert report.violations
    assert report.violations == check_response_tables(peres, report.tables)


def test_nonlocal_strategies_pass_direct_checks(peres, tapes):
    # these satisfy SPIN and TWIN quadruple by quadruple, but only by reading the other side's setting
    for name in ("nonlocal_cheater", "twin_copy", "born_sampler"):
        report = derandomization_report(peres, tapes, STRATEGIES[name], BUDGET)
        assert report.direct_violations == []
        assert report.violations


def test_coloring_strategy_passes_on_toy(toy):
    model = search_101(build_constraints(toy)).model
    toy_tapes = generate_tapes(3, 8, seed=0)
    report = derandomization_report(toy, toy_tapes, coloring_strategy(model), 8)
    assert report.violations == [] and report.direct_violations == []


def test_derandomize_deterministic(peres):
    zeros = {q: np.zeros(BUDGET, dtype=np.uint8) for q in range(1, 1321)}
    a = derandomize(peres, zeros, STRATEGIES["uniform"], BUDGET)
    b = derandomize(peres, zeros, STRATEGIES["uniform"], BUDGET)
    assert a == b


def test_derandomize_pure_function_of_tapes(peres, tapes):
    for name in ("random_coloring", "greedy_101", "born_sampler"):
        assert derandomize(peres, tapes, STRATEGIES[name], BUDGET) == derandomize(peres, tapes, STRATEGIES[name], BUDGET)


def test_short_tape_precondition(peres):
    short = generate_tapes(1320, 4, seed=1)
    with pytest.raises(ValueError):
        derandomize(peres, short, STRATEGIES["uniform"], 8)
    missing = dict(generate_tapes(1320, 8, seed=1))
    del missing[500]
    with pytest.raises(ValueError):
        derandomize(peres, missing, STRATEGIES["constant"], 8)


def test_budget_exhaustion(peres):
    tapes = generate_tapes(1320, 200, seed=1)
    with pytest.raises(TapeExhausted):
        derandomize(peres, tapes, STRATEGIES["random_coloring"], 10)


def test_tape_reader():
    tape = Tape(np.array([1, 0, 1, 1], dtype=np.uint8), 4)
    assert tape.bits(3) == 0b101
    assert tape.bit() == 1
    with pytest.raises(TapeExhausted):
        tape.bit()


def test_tapes_json_roundtrip():
    tapes = generate_tapes(5, 16, seed=9)
    back = tapes_from_json(tapes_to_json(tapes))
    assert sorted(back) == [1, 2, 3, 4, 5]
    for q in tapes:
        assert np.array_equal(back[q], tapes[q])


def test_spin_violation_reported(toy):
    tables = ResponseTables(((1, 1, 1),), (1, 1, 1))
    kinds = {v.kind for v in check_response_tables(toy, tables)}
    assert "SPIN" in kinds
