"""Exact solver versus the brute-force oracle, plus solver-specific behavior."""

import numpy as np
import pytest

from maxeq.formula import (
    HARD,
    Assignment,
    Clause,
    CnfFormula,
    ContractViolation,
    WcnfFormula,
    clause,
    evaluate_wcnf,
)
from maxeq.maxsat_solver import (
    Assumptions,
    Objective,
    Solver,
    Status,
    brute_force_solve,
    enumerate_optima,
    solve,
)


def random_formula(rng, n_max=12, cl_max=30):
    n = int(rng.integers(1, n_max + 1))
    n_cl = int(rng.integers(1, cl_max + 1))
    weighted = []
    for _ in range(n_cl):
        width = int(rng.integers(1, min(n, 4) + 1))
        vs = rng.choice(np.arange(1, n + 1), size=width, replace=False)
        lits = [int(v) if rng.random() < 0.5 else -int(v) for v in vs]
        if rng.random() < 0.3:
            weighted.append((HARD, Clause.from_ints(lits)))
        else:
            weighted.append((round(float(rng.uniform(0.1, 5.0)), 3),
                             Clause.from_ints(lits)))
    return WcnfFormula.build(n, weighted), n


class TestAgainstBruteForce:
    def test_thousand_random_instances(self):
        rng = np.random.default_rng(20240809)
        for _ in range(1000):
            f, n = random_formula(rng)
            assumptions = {}
            if rng.random() < 0.4:
                size = min(n, int(rng.integers(1, 3)))
                for v in rng.choice(np.arange(1, n + 1), size=size, replace=False):
                    assumptions[int(v)] = int(rng.integers(0, 2))
            obj = Objective.MAXIMIZE if rng.random() < 0.7 else Objective.MINIMIZE
            got = solve(f, assumptions, obj)
            want = brute_force_solve(f, assumptions, obj)
            assert got.status == want.status
            if got.status is Status.OPTIMAL:
                assert got.weight == pytest.approx(want.weight, abs=1e-9)
                v = evaluate_wcnf(f, got.assignment)
                assert v.hard_ok
                assert v.weight == pytest.approx(got.weight, abs=1e-9)
                for var, b in assumptions.items():
                    assert got.assignment[var] == b


class TestBasics:
    def test_soft_conflict_prefers_heavier(self):
        f = WcnfFormula.build(1, [(2.0, clause(1)), (3.0, clause(-1))])
        r = solve(f)
        assert r.weight == 3.0 and r.assignment[1] == 0

    def test_hard_contradiction(self):
        f = WcnfFormula.build(1, [(HARD, clause(1)), (HARD, clause(-1))])
        assert solve(f).status is Status.HARD_UNSAT

    def test_empty_formula(self):
        f = WcnfFormula.build(2, [])
        r = brute_force_solve(f)
        assert r.status is Status.OPTIMAL and r.weight == 0.0
        r2 = solve(f)
        assert r2.status is Status.OPTIMAL and r2.weight == 0.0

    def test_all_hard_satisfiable_weight_zero(self):
        f = WcnfFormula.build(3, [(HARD, clause(1, 2)), (HARD, clause(-2, 3))])
        r = solve(f)
        assert r.status is Status.OPTIMAL and r.weight == 0.0

    def test_brute_force_refuses_large(self):
        f = WcnfFormula.build(30, [(1.0, clause(1))])
        with pytest.raises(ContractViolation):
            brute_force_solve(f)

    def test_assumptions_conflicting_rejected(self):
        with pytest.raises(ContractViolation):
            Assumptions.of([(1, 0), (1, 1)])

    def test_assumption_monotonicity(self):
        rng = np.random.default_rng(99)
        for _ in range(50):
            f, n = random_formula(rng, n_max=8, cl_max=15)
            base = solve(f)
            if base.status is not Status.OPTIMAL:
                continue
            v = int(rng.integers(1, n + 1))
            for b in (0, 1):
                r = solve(f, {v: b})
                if r.status is Status.OPTIMAL:
                    assert r.weight <= base.weight + 1e-9


class TestEnumerate:
    def test_singleton(self):
        f = WcnfFormula.build(1, [(1.0, clause(1))])
        eo = enumerate_optima(f, None, [1], limit=4)
        assert eo.optima == (((1, 1),),) and not eo.overflow

    def test_two_optima(self):
        f = WcnfFormula.build(1, [(1.0, clause(1)), (1.0, clause(-1))])
        eo = enumerate_optima(f, None, [1], limit=4)
        assert set(eo.optima) == {((1, 0),), ((1, 1),)}
        assert not eo.overflow

    def test_overflow_flag(self):
        # every assignment of two free variables is optimal
        f = WcnfFormula.build(2, [(1.0, clause(1, -1))])  # tautology soft
        eo = enumerate_optima(f, None, [1, 2], limit=2)
        assert len(eo.optima) == 2 and eo.overflow

    def test_hard_unsat_propagates(self):
        f = WcnfFormula.build(1, [(HARD, clause(1))])
        eo = enumerate_optima(f, {1: 0}, [1], limit=2)
        assert eo.status is Status.HARD_UNSAT

    def test_blocking_is_closed(self):
        # after enumerating all optima, the blocked formula's best is worse
        rng = np.random.default_rng(5)
        for _ in range(30):
            f, n = random_formula(rng, n_max=6, cl_max=10)
            eo = enumerate_optima(f, None, list(range(1, n + 1)), limit=64)
            if eo.status is not Status.OPTIMAL or eo.overflow:
                continue
            count = 1 << n
            weights = []
            import itertools
            for bits in itertools.product([0, 1], repeat=n):
                a = Assignment.from_values(list(bits), n)
                v = evaluate_wcnf(f, a)
                if v.hard_ok:
                    weights.append((tuple((i + 1, bits[i]) for i in range(n)), v.weight))
            top = max(w for _, w in weights)
            winners = {p for p, w in weights if w > top - 1e-9}
            assert set(eo.optima) == winners

    def test_projection_hides_auxiliaries(self):
        # two equivalent completions collapse to one projected optimum
        f = WcnfFormula.build(2, [(1.0, clause(1)), (HARD, clause(2, -2))])
        eo = enumerate_optima(f, None, [1], limit=4)
        assert eo.optima == (((1, 1),),)

    def test_deterministic_order(self):
        f = WcnfFormula.build(2, [(1.0, clause(1)), (1.0, clause(-1)),
                                  (1.0, clause(2)), (1.0, clause(-2))])
        runs = [enumerate_optima(f, None, [1, 2], limit=8).optima
                for _ in range(3)]
        assert runs[0] == runs[1] == runs[2]


class TestMinimize:
    def test_minimize_picks_lighter(self):
        f = WcnfFormula.build(1, [(2.0, clause(1)), (3.0, clause(-1))])
        r = solve(f, None, Objective.MINIMIZE)
        assert r.weight == 2.0 and r.assignment[1] == 1

    def test_minimize_respects_hard(self):
        f = WcnfFormula.build(2, [(HARD, clause(1)), (5.0, clause(1, 2))])
        r = solve(f, None, Objective.MINIMIZE)
        # the soft clause is forced by the hard unit
        assert r.weight == 5.0
