"""Reductions between CNF, Max2SAT, equality form, C, and weighted MaxSAT."""

import itertools

import numpy as np
import pytest

from maxeq.decode import (
    DecodeMeta,
    Max2SatFormula,
    aux_completion_clauses,
    c_to_maxeq,
    cnf_to_max2sat,
    emit_meta,
    max2sat_to_maxeq,
    maxeq_from_weights,
    maxeq_to_wcnf,
    parse_meta,
    round_s,
    rules_to_c,
    s_to_c,
    ternary_s_to_wcnf,
)
from maxeq.formula import (
    Assignment,
    Clause,
    CnfFormula,
    ContractViolation,
    Literal,
    WeightedClause,
    clause,
    evaluate_cnf,
    evaluate_maxeq,
    evaluate_wcnf,
)
from maxeq.sdp_layer import CMatrix, SMatrix


def best_extension(wcnf, bits, n_orig):
    """Maximum feasible soft weight over gadget-variable extensions."""
    n_aux = wcnf.num_vars - n_orig
    best = None
    for ext in itertools.product([0, 1], repeat=n_aux):
        a = Assignment.from_values(list(bits) + list(ext), wcnf.num_vars)
        v = evaluate_wcnf(wcnf, a)
        if v.hard_ok and (best is None or v.weight > best):
            best = v.weight
    return best


class TestCToMaxEq:
    def test_zero_off_diagonal_gives_empty(self):
        c = CMatrix(3, 0, np.zeros((4, 4)))
        assert c_to_maxeq(c).constraints == ()

    def test_single_entry_weight(self):
        e = np.zeros((4, 4))
        e[1, 2] = e[2, 1] = 0.5
        f = c_to_maxeq(CMatrix(3, 0, e))
        assert len(f.constraints) == 1
        assert f.constraints[0].weight == -2.0

    def test_integral_point_identity(self):
        # equality score at 0/1 points vs the quadratic form at +-1 points
        rng = np.random.default_rng(12)
        for _ in range(20):
            n = int(rng.integers(2, 6))
            raw = rng.normal(0, 1, (n + 1, n + 1))
            c = CMatrix.from_raw(n, 0, raw)
            f = c_to_maxeq(c)
            offsum = float(np.sum(c.entries))  # ordered sum over all pairs
            for bits in itertools.product([0, 1], repeat=n):
                sigma = np.concatenate([[1.0], 2.0 * np.array(bits) - 1.0])
                quad = float(sigma @ c.entries @ sigma)
                score = evaluate_maxeq(f, Assignment.from_values(list(bits), n))
                assert score == pytest.approx(-offsum - quad, abs=1e-9)


class TestMaxEqToWcnf:
    def test_positive_gadget_shape(self):
        f = maxeq_from_weights(2, {(1, 2): 2.0})
        wcnf, meta = maxeq_to_wcnf(f)
        hard = list(wcnf.hard_clauses())
        soft = list(wcnf.soft_clauses())
        assert len(hard) == 2 and all(len(c) == 3 for c in hard)
        assert len(soft) == 1 and soft[0].weight == 2.0
        assert meta.offset == 0.0

    def test_negative_gadget_offset(self):
        f = maxeq_from_weights(2, {(1, 2): -3.0})
        wcnf, meta = maxeq_to_wcnf(f)
        soft = list(wcnf.soft_clauses())
        assert len(soft) == 1 and soft[0].weight == 3.0
        assert soft[0].clause.to_ints() == (-3,)
        assert meta.offset == 3.0

    def test_optimum_preservation_mixed(self):
        f = maxeq_from_weights(2, {(1, 2): 2.0, (0, 1): -1.5})
        wcnf, meta = maxeq_to_wcnf(f)
        for bits in itertools.product([0, 1], repeat=2):
            a = Assignment.from_values(list(bits), 2)
            assert best_extension(wcnf, bits, 2) - meta.offset == pytest.approx(
                evaluate_maxeq(f, a))

    def test_optimum_preservation_random(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            n = int(rng.integers(2, 5))
            pairs = [(i, j) for i in range(n + 1) for j in range(i + 1, n + 1)]
            n_take = min(len(pairs), int(rng.integers(1, 6)))
            take = rng.choice(len(pairs), size=n_take, replace=False)
            weights = {pairs[t]: round(float(rng.normal(0, 2)), 3) for t in take}
            f = maxeq_from_weights(n, weights)
            wcnf, meta = maxeq_to_wcnf(f)
            for bits in itertools.product([0, 1], repeat=n):
                a = Assignment.from_values(list(bits), n)
                assert best_extension(wcnf, bits, n) - meta.offset == pytest.approx(
                    evaluate_maxeq(f, a), abs=1e-9)

    def test_completion_clauses_pin_weight_function(self):
        # with the completion clauses added, every feasible total assignment
        # scores exactly equality-score + offset
        f = maxeq_from_weights(3, {(1, 2): 2.0, (2, 3): -1.0, (0, 3): 0.7})
        wcnf, meta = maxeq_to_wcnf(f)
        from maxeq.formula import HARD, WcnfFormula
        tight = WcnfFormula.build(
            wcnf.num_vars,
            [(wc.weight, wc.clause) for wc in wcnf.clauses]
            + [(HARD, c) for c in aux_completion_clauses(meta)],
            wcnf.projection)
        n_aux = wcnf.num_vars - 3
        for bits in itertools.product([0, 1], repeat=3):
            feasible = []
            for ext in itertools.product([0, 1], repeat=n_aux):
                a = Assignment.from_values(list(bits) + list(ext), wcnf.num_vars)
                v = evaluate_wcnf(tight, a)
                if v.hard_ok:
                    feasible.append(v.weight)
            a = Assignment.from_values(list(bits), 3)
            want = evaluate_maxeq(f, a) + meta.offset
            assert len(feasible) == 1 and feasible[0] == pytest.approx(want)


class TestMax2SatToMaxEq:
    def clause_formula(self, lits, w=1.0):
        return Max2SatFormula(2, (WeightedClause(w, Clause.from_ints(lits)),))

    def test_or_gadget_weights(self):
        f = max2sat_to_maxeq(self.clause_formula([1, 2]))
        by_pair = {(c.i, c.j): c.weight for c in f.constraints}
        assert by_pair == {(1, 2): -1.0, (0, 1): 1.0, (0, 2): 1.0}

    @pytest.mark.parametrize("lits,sat_minus_unsat", [
        ([1, 2], 2.0), ([-1, 2], 2.0), ([1, -2], 2.0), ([-1, -2], 2.0),
    ])
    def test_two_w_separation(self, lits, sat_minus_unsat):
        w = 1.3
        f = max2sat_to_maxeq(self.clause_formula(lits, w))
        sat_scores = set()
        unsat_scores = set()
        cl = Clause.from_ints(lits)
        for bits in itertools.product([0, 1], repeat=2):
            a = Assignment.from_values(list(bits), 2)
            score = round(evaluate_maxeq(f, a), 9)
            if any(a.literal_true(l) for l in cl.literals):
                sat_scores.add(score)
            else:
                unsat_scores.add(score)
        assert len(sat_scores) == 1 and len(unsat_scores) == 1
        assert sat_scores.pop() - unsat_scores.pop() == pytest.approx(w * sat_minus_unsat)

    def test_unit_clause_sign_handling(self):
        f = max2sat_to_maxeq(self.clause_formula([-2], 2.0))
        assert {(c.i, c.j): c.weight for c in f.constraints} == {(0, 2): -2.0}

    def test_same_pair_merging(self):
        f = Max2SatFormula(2, (WeightedClause(1.0, clause(1, 2)),
                               WeightedClause(1.0, clause(-1, -2))))
        meq = max2sat_to_maxeq(f)
        # pair weights cancel: -w + -w vs +w... (1,2): -1 + -1 = -2; truth pairs cancel
        by_pair = {(c.i, c.j): c.weight for c in meq.constraints}
        assert by_pair == {(1, 2): -2.0}

    def test_hard_clause_rejected(self):
        from maxeq.formula import HARD
        f = Max2SatFormula(2, (WeightedClause(HARD, clause(1, 2)),))
        with pytest.raises(ContractViolation):
            max2sat_to_maxeq(f)


class TestCnfToMax2Sat:
    def test_short_clause_passthrough(self):
        f = CnfFormula.from_ints(2, [[1], [1, -2]])
        m2s, meta = cnf_to_max2sat(f)
        assert m2s.num_vars == 2
        assert [wc.clause.to_ints() for wc in m2s.clauses] == [(1,), (1, -2)]
        assert meta.aux_vars == ()

    def test_ternary_gadget_payoffs(self):
        f = CnfFormula.from_ints(3, [[1, 2, 3]])
        m2s, meta = cnf_to_max2sat(f)
        assert len(meta.aux_vars) == 1
        assert len(m2s.clauses) == 10
        d = meta.aux_vars[0]
        for bits in itertools.product([0, 1], repeat=3):
            best = max(
                sum(wc.weight for wc in m2s.clauses
                    if any(Assignment.from_values(list(bits) + [dv], 4).literal_true(l)
                           for l in wc.clause.literals))
                for dv in (0, 1))
            assert best == pytest.approx(7.0 if any(bits) else 6.0)
        assert meta.thresholds[0].weight_sat == 7.0
        assert meta.thresholds[0].weight_unsat == 6.0

    def test_wide_clause_chain(self):
        f = CnfFormula.from_ints(4, [[1, 2, 3, 4]])
        m2s, meta = cnf_to_max2sat(f)
        # one chain auxiliary plus one gadget auxiliary per ternary link
        assert len(meta.aux_vars) == 3
        assert len(m2s.clauses) == 20
        # projected optima over the original variables = models of the clause
        best_by_bits = {}
        n_aux = m2s.num_vars - 4
        for bits in itertools.product([0, 1], repeat=4):
            best = -1.0
            for ext in itertools.product([0, 1], repeat=n_aux):
                a = Assignment.from_values(list(bits) + list(ext), m2s.num_vars)
                tot = sum(wc.weight for wc in m2s.clauses
                          if any(a.literal_true(l) for l in wc.clause.literals))
                best = max(best, tot)
            best_by_bits[bits] = round(best, 9)
        top = max(best_by_bits.values())
        winners = {b for b, v in best_by_bits.items() if v == top}
        assert winners == {b for b in best_by_bits if any(b)}

    def test_empty_clause_rejected(self):
        with pytest.raises(ContractViolation):
            cnf_to_max2sat(CnfFormula(1, (Clause(()),)))


class TestRulesToC:
    def test_round_trip_weight_function(self):
        f = CnfFormula.from_ints(3, [[1, -2], [2, 3], [-1, -3]])
        c, meta = rules_to_c(f, 1.0)
        meq_direct = max2sat_to_maxeq(cnf_to_max2sat(f, 1.0)[0])
        meq_back = c_to_maxeq(c)
        n = meq_direct.num_vars
        for bits in itertools.product([0, 1], repeat=n):
            a = Assignment.from_values(list(bits), n)
            assert evaluate_maxeq(meq_back, a) == pytest.approx(
                evaluate_maxeq(meq_direct, a), abs=1e-9)

    def test_base_weight_scales(self):
        f = CnfFormula.from_ints(2, [[1, 2]])
        c1, _ = rules_to_c(f, 1.0)
        c5, _ = rules_to_c(f, 5.0)
        np.testing.assert_allclose(c5.entries, 5.0 * c1.entries)

    def test_argmax_is_model_set(self):
        # scores over original variables peak exactly on the models
        f = CnfFormula.from_ints(3, [[1, 2], [-2, 3]])
        c, meta = rules_to_c(f, 1.0)
        meq = c_to_maxeq(c)
        n = meq.num_vars
        scores = {}
        for bits in itertools.product([0, 1], repeat=n):
            a = Assignment.from_values(list(bits), n)
            key = bits[:3]
            scores[key] = max(scores.get(key, -1e18), evaluate_maxeq(meq, a))
        top = max(scores.values())
        winners = {k for k, v in scores.items() if v > top - 1e-9}
        models = {bits for bits in itertools.product([0, 1], repeat=3)
                  if evaluate_cnf(f, Assignment.from_values(list(bits), 3))}
        assert winners == models


class TestSMatrixOps:
    def test_parity_clause_matrix_degenerates(self):
        rows = np.array([
            [-1.0, 1.0, 1.0, -1.0],
            [-1.0, 1.0, -1.0, 1.0],
            [-1.0, -1.0, 1.0, 1.0],
            [-1.0, -1.0, -1.0, -1.0],
        ])
        s = SMatrix(3, 0, rows)
        c = s_to_c(s)
        assert np.all(c.entries == 0.0)

    def test_single_row_gram(self):
        s = SMatrix(2, 0, np.array([[0.0, 1.0, 1.0]]))
        c = s_to_c(s)
        assert c.entries[1, 2] == 1.0

    def test_gram_symmetry_random(self):
        rng = np.random.default_rng(3)
        s = SMatrix(4, 1, rng.normal(0, 1, (7, 6)))
        c = s_to_c(s)
        np.testing.assert_array_equal(c.entries, c.entries.T)

    @pytest.mark.parametrize("value,eps,want", [
        (0.7, 0.5, 1.0), (-0.3, 0.5, 0.0), (-0.9, 0.5, -1.0), (0.0, 0.0, 0.0),
    ])
    def test_round_s(self, value, eps, want):
        s = SMatrix(1, 0, np.array([[0.0, value]]))
        assert round_s(s, eps).entries[0, 1] == want

    def test_ternary_rows_to_clauses(self):
        rows = np.array([
            [1.0, 1.0, 0.0],   # satisfied by truth column, dropped
            [-1.0, 1.0, -1.0],  # truth literal false, stripped
            [0.0, 0.0, 1.0],
        ])
        w = ternary_s_to_wcnf(SMatrix(2, 0, rows))
        assert [wc.clause.to_ints() for wc in w.clauses] == [(1, -2), (2,)]


class TestMetaSidecar:
    def test_round_trip(self):
        f = maxeq_from_weights(3, {(1, 2): 2.0, (0, 3): -1.0})
        _, meta = maxeq_to_wcnf(f)
        back = parse_meta(emit_meta(meta))
        assert back == meta
