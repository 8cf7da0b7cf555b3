"""Formula types, evaluation semantics, negation, and WDIMACS I/O."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxeq.formula import (
    HARD,
    Assignment,
    Clause,
    CnfFormula,
    ContractViolation,
    EqualityConstraint,
    Literal,
    MaxEqFormula,
    WcnfFormula,
    WdimacsParseError,
    WeightedClause,
    clause,
    evaluate_cnf,
    evaluate_maxeq,
    evaluate_wcnf,
    tseitin_negate,
    wdimacs_emit,
    wdimacs_parse,
)


def all_assignments(n):
    for bits in itertools.product([0, 1], repeat=n):
        yield Assignment.from_values(list(bits), n)


class TestTypes:
    def test_literal_validation(self):
        with pytest.raises(ContractViolation):
            Literal(0)
        assert (-Literal(3)).positive is False

    def test_clause_deduplicates(self):
        c = clause(1, -2, 1)
        assert c.to_ints() == (1, -2)
        assert not c.tautology

    def test_clause_tautology_flagged(self):
        c = clause(1, -1, 2)
        assert c.tautology
        a = Assignment.from_values([0, 0], 2)
        assert evaluate_cnf(CnfFormula(2, (c,)), a)

    def test_cnf_range_check(self):
        with pytest.raises(ContractViolation):
            CnfFormula(1, (clause(2),))

    def test_weighted_clause_rejects_nonpositive(self):
        with pytest.raises(ContractViolation):
            WeightedClause(-1.0, clause(1))
        with pytest.raises(ContractViolation):
            WeightedClause(float("inf"), clause(1))

    def test_build_drops_zero_weights(self):
        f = WcnfFormula.build(1, [(0.0, clause(1)), (1.0, clause(-1))])
        assert len(f.clauses) == 1

    def test_equality_constraint_normalizes_order(self):
        c = EqualityConstraint(5, 2, 1.0)
        assert (c.i, c.j) == (2, 5)
        with pytest.raises(ContractViolation):
            EqualityConstraint(3, 3, 1.0)

    def test_maxeq_duplicate_pair_rejected(self):
        with pytest.raises(ContractViolation):
            MaxEqFormula(2, (EqualityConstraint(1, 2, 1.0),
                             EqualityConstraint(2, 1, 2.0)))

    def test_assignment_totality(self):
        with pytest.raises(ContractViolation):
            Assignment.from_values({1: 1}, 2)


class TestEvaluate:
    def test_xor_truth_table(self):
        f = CnfFormula.from_ints(2, [[1, 2], [-1, -2]])
        assert evaluate_cnf(f, Assignment.from_values([1, 0], 2))
        assert not evaluate_cnf(f, Assignment.from_values([1, 1], 2))

    def test_totality_enforced(self):
        f = CnfFormula.from_ints(3, [[1, 2, 3]])
        with pytest.raises(ContractViolation):
            evaluate_cnf(f, Assignment.from_values([1, 0], 2))

    def test_wcnf_no_soft(self):
        f = WcnfFormula.build(1, [(HARD, clause(1))])
        v = evaluate_wcnf(f, Assignment.from_values([1], 1))
        assert v.hard_ok and v.weight == 0.0

    def test_wcnf_gadget_values(self):
        # equality gadget with weight 2 on (a, b) through indicator d
        f = WcnfFormula.build(3, [(HARD, clause(-1, 2, -3)),
                                  (HARD, clause(1, -2, -3)),
                                  (2.0, clause(3))])
        v = evaluate_wcnf(f, Assignment.from_values([1, 1, 1], 3))
        assert v.hard_ok and v.weight == 2.0
        v = evaluate_wcnf(f, Assignment.from_values([1, 0, 1], 3))
        assert not v.hard_ok and v.weight == 2.0

    def test_wcnf_weight_additive_over_disjoint_union(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            f1 = WcnfFormula.build(2, [(1.5, clause(1)), (2.5, clause(-2))])
            f2 = WcnfFormula.build(4, [(0.5, clause(3, 4))])
            merged = WcnfFormula.build(
                4, [(wc.weight, wc.clause) for wc in f1.clauses + f2.clauses])
            bits = [int(b) for b in rng.integers(0, 2, 4)]
            a = Assignment.from_values(bits, 4)
            assert evaluate_wcnf(merged, a).weight == pytest.approx(
                evaluate_wcnf(f1, Assignment.from_values(bits[:2], 2)).weight
                + evaluate_wcnf(f2, a).weight)

    def test_maxeq_gadget_scores(self):
        # translated (a or b): -1(a=b), 1(a=T), 1(b=T)
        f = MaxEqFormula(2, (EqualityConstraint(1, 2, -1.0),
                             EqualityConstraint(0, 1, 1.0),
                             EqualityConstraint(0, 2, 1.0)))
        scores = {}
        for a in all_assignments(2):
            scores[(a[1], a[2])] = evaluate_maxeq(f, a)
        assert scores[(1, 1)] == 1.0
        assert scores[(0, 0)] == -1.0
        assert scores[(1, 0)] == scores[(0, 1)] == 1.0

    def test_maxeq_empty(self):
        f = MaxEqFormula(2, ())
        assert evaluate_maxeq(f, Assignment.from_values([0, 1], 2)) == 0.0


class TestTseitinNegate:
    def models(self, f, n):
        return {tuple(a.bits[1:n + 1]) for a in all_assignments(f.num_vars)
                if evaluate_cnf(f, a)}

    def test_unit_clause(self):
        f = CnfFormula.from_ints(1, [[1]])
        neg = tseitin_negate(f)
        assert self.models(neg, 1) == {(0,)}

    def test_two_units(self):
        f = CnfFormula.from_ints(2, [[1], [2]])
        neg = tseitin_negate(f)
        assert self.models(neg, 2) == {(0, 0), (0, 1), (1, 0)}

    @pytest.mark.parametrize("n_clauses", [1, 2, 4])
    def test_random_formulas_complement(self, n_clauses):
        rng = np.random.default_rng(n_clauses)
        for _ in range(10):
            n = int(rng.integers(2, 5))
            cl = []
            for _ in range(n_clauses):
                width = int(rng.integers(1, n + 1))
                vs = rng.choice(np.arange(1, n + 1), size=width, replace=False)
                cl.append([int(v) if rng.random() < 0.5 else -int(v) for v in vs])
            f = CnfFormula.from_ints(n, cl)
            neg = tseitin_negate(f)
            direct = {tuple(a.bits[1:]) for a in all_assignments(n)
                      if not evaluate_cnf(f, a)}
            assert self.models(neg, n) == direct

    def test_projection_multiplicity_one(self):
        # each original assignment extends to exactly one model of the negation
        f = CnfFormula.from_ints(2, [[1, 2], [-1, -2]])
        neg = tseitin_negate(f)
        count = {}
        for a in all_assignments(neg.num_vars):
            if evaluate_cnf(neg, a):
                key = tuple(a.bits[1:3])
                count[key] = count.get(key, 0) + 1
        assert all(v == 1 for v in count.values())


class TestWdimacs:
    def test_emit_simple(self):
        f = WcnfFormula.build(1, [(2.0, clause(1))])
        text = wdimacs_emit(f, 1.0).decode()
        assert text.splitlines()[0] == "p wcnf 1 1 3"
        assert "2 1 0" in text

    def test_hard_only_top(self):
        f = WcnfFormula.build(2, [(HARD, clause(1, 2))])
        text = wdimacs_emit(f, 1.0).decode()
        assert text.splitlines()[0] == "p wcnf 2 1 1"
        assert "1 1 2 0" in text

    def test_round_trip_structure(self):
        f = WcnfFormula.build(3, [(HARD, clause(-1, 2, -3)),
                                  (HARD, clause(1, -2, -3)),
                                  (2.0, clause(3))])
        g = wdimacs_parse(wdimacs_emit(f, 1.0))
        assert g.num_vars == 3 and len(g.clauses) == 3
        assert [wc.is_hard for wc in g.clauses] == [True, True, False]
        assert g.clauses[2].weight == 2.0
        assert g.clauses[0].clause.to_ints() == (-1, 2, -3)

    def test_clause_count_mismatch_rejected(self):
        with pytest.raises(WdimacsParseError):
            wdimacs_parse("p wcnf 1 2 3\n2 1 0\n")

    def test_negative_literals(self):
        g = wdimacs_parse("p wcnf 2 1 5\n3 -1 2 0\n")
        lits = g.clauses[0].clause.literals
        assert (lits[0].var, lits[0].positive) == (1, False)
        assert (lits[1].var, lits[1].positive) == (2, True)

    def test_collision_warning_record(self):
        f = WcnfFormula.build(2, [(1.0, clause(1)), (1.4, clause(2))])
        text = wdimacs_emit(f, 1.0).decode()
        assert "c warning" in text

    def test_missing_terminator(self):
        with pytest.raises(WdimacsParseError):
            wdimacs_parse("p wcnf 1 1 3\n2 1\n")

    @settings(max_examples=60, deadline=None)
    @given(st.data())
    def test_round_trip_preserves_optimal_set(self, data):
        from maxeq.maxsat_solver import brute_force_solve
        n = data.draw(st.integers(2, 6))
        n_cl = data.draw(st.integers(1, 8))
        weighted = []
        for _ in range(n_cl):
            width = data.draw(st.integers(1, min(3, n)))
            vs = data.draw(st.lists(st.integers(1, n), min_size=width,
                                    max_size=width, unique=True))
            lits = [v if data.draw(st.booleans()) else -v for v in vs]
            # weights on the scale grid so quantization is exact
            w = data.draw(st.integers(1, 50)) / 10.0
            hard = data.draw(st.booleans())
            weighted.append((HARD if hard else w, Clause.from_ints(lits)))
        f = WcnfFormula.build(n, weighted)
        g = wdimacs_parse(wdimacs_emit(f, 10.0))
        r1 = brute_force_solve(f)
        r2 = brute_force_solve(g)
        assert r1.status == r2.status
        if r1.status.value == "optimal":
            assert r1.weight * 10.0 == pytest.approx(r2.weight)
