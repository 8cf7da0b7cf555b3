"""Exact weighted MaxSAT solving.

Branch and bound with hard-clause unit propagation, weakly-dominant
greedy assignments, and an upper bound of "weight not yet falsified".
Optima are true optima (within a 1e-9 weight tolerance), never
approximate.  A brute-force enumerator serves as the testing oracle.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from maxeq import _bb
from maxeq.formula import Assignment, ContractViolation, WcnfFormula

WEIGHT_EPS = 1e-9


class Objective(enum.Enum):
    MAXIMIZE = "maximize"
    MINIMIZE = "minimize"


class Status(enum.Enum):
    OPTIMAL = "optimal"
    HARD_UNSAT = "hard_unsat"


@dataclass(frozen=True)
class Assumptions:
    """Partial assignment imposed as hard unit facts."""

    values: tuple[tuple[int, int], ...]

    @classmethod
    def of(cls, mapping: Mapping[int, int] | Iterable[tuple[int, int]] | None) -> "Assumptions":
        if mapping is None:
            return cls(())
        pairs = mapping.items() if isinstance(mapping, Mapping) else mapping
        out = tuple(sorted((int(v), int(b)) for v, b in pairs))
        seen = {}
        for v, b in out:
            if b not in (0, 1):
                raise ContractViolation(f"assumption value must be 0/1, got {b}")
            if v in seen and seen[v] != b:
                raise ContractViolation(f"conflicting assumptions on variable {v}")
            seen[v] = b
        return cls(out)


@dataclass(frozen=True)
class SolveResult:
    status: Status
    weight: float
    assignment: Assignment | None


@dataclass(frozen=True)
class OptimaResult:
    status: Status
    weight: float
    optima: tuple[tuple[tuple[int, int], ...], ...]  # projected assignments
    overflow: bool


class Solver:
    """Compiled formula plus search entry points.

    The kernel keeps all mutable state in locals, so one instance may
    serve concurrent queries; the branching order is static (descending
    clause involvement, then index), making every result deterministic.
    """

    def __init__(self, formula: WcnfFormula):
        self.formula = formula
        n = formula.num_vars
        lits = []
        starts = [0]
        weights = []
        tauts = []
        for wc in formula.clauses:
            lits.extend(wc.clause.to_ints())
            starts.append(len(lits))
            weights.append(-1.0 if wc.is_hard else float(wc.weight))
            tauts.append(1 if wc.clause.tautology else 0)
        self.cl_lits = np.array(lits, dtype=np.int32)
        self.cl_start = np.array(starts, dtype=np.int32)
        self.cl_w = np.array(weights, dtype=np.float64)
        self.cl_taut = np.array(tauts, dtype=np.int8)
        self.occ_start, self.occ_lit = _occ_lists(n, self.cl_start, self.cl_lits)
        counts = np.zeros(n + 1, dtype=np.int64)
        if self.cl_lits.size:
            counts += np.bincount(np.abs(self.cl_lits), minlength=n + 1)
        idx = np.arange(1, n + 1)
        self.order = idx[np.lexsort((idx, -counts[1:]))].astype(np.int32)

    def _run(self, assumptions: Assumptions, objective: Objective,
             search: int, target: float, greedy_ok: np.ndarray,
             extra_hard: list[tuple[int, ...]] | None = None):
        n = self.formula.num_vars
        for v, _ in assumptions.values:
            if not 1 <= v <= n:
                raise ContractViolation(f"assumption variable {v} outside range")
        if extra_hard:
            base = self.cl_lits.size
            lens = np.array([len(b) for b in extra_hard], dtype=np.int32)
            cl_lits = np.concatenate(
                [self.cl_lits, np.array([l for b in extra_hard for l in b], dtype=np.int32)])
            cl_start = np.concatenate(
                [self.cl_start, base + np.cumsum(lens, dtype=np.int32)])
            cl_w = np.concatenate([self.cl_w, np.full(len(extra_hard), -1.0)])
            cl_taut = np.concatenate([self.cl_taut,
                                      np.zeros(len(extra_hard), dtype=np.int8)])
            occ_start, occ_lit = _occ_lists(n, cl_start, cl_lits)
        else:
            cl_lits, cl_start = self.cl_lits, self.cl_start
            cl_w, cl_taut = self.cl_w, self.cl_taut
            occ_start, occ_lit = self.occ_start, self.occ_lit
        a_var = np.array([v for v, _ in assumptions.values], dtype=np.int32)
        a_val = np.array([b for _, b in assumptions.values], dtype=np.int8)
        out = np.full(n + 1, -1, dtype=np.int8)
        mode = _bb.MODE_MAX if objective is Objective.MAXIMIZE else _bb.MODE_MIN
        status, weight = _bb.bb_search(
            n, cl_start, cl_lits, cl_w, cl_taut, occ_start, occ_lit,
            self.order, greedy_ok, a_var, a_val, mode, search, target,
            WEIGHT_EPS, out)
        return status, weight, out

    def solve(self, assumptions: Assumptions | Mapping[int, int] | None = None,
              objective: Objective = Objective.MAXIMIZE) -> SolveResult:
        a = assumptions if isinstance(assumptions, Assumptions) else Assumptions.of(assumptions)
        greedy = np.ones(self.formula.num_vars + 1, dtype=np.uint8)
        status, weight, out = self._run(a, objective, _bb.SEARCH_OPTIMIZE, 0.0, greedy)
        if status != _bb.STATUS_OPTIMAL:
            return SolveResult(Status.HARD_UNSAT, 0.0, None)
        out[0] = 1
        return SolveResult(Status.OPTIMAL, weight, Assignment(out))

    def enumerate_optima(self, assumptions: Assumptions | Mapping[int, int] | None,
                         projection: Iterable[int], limit: int) -> OptimaResult:
        """All projected assignments achieving the optimum, up to limit.

        Found projections are excluded with hard blocking clauses; the
        search then only needs to find any assignment tying the optimum.
        """
        if limit < 1:
            raise ContractViolation("limit must be >= 1")
        a = assumptions if isinstance(assumptions, Assumptions) else Assumptions.of(assumptions)
        proj = sorted(set(projection))
        if proj and (proj[0] < 1 or proj[-1] > self.formula.num_vars):
            raise ContractViolation("projection outside variable range")
        first = self.solve(a, Objective.MAXIMIZE)
        if first.status is Status.HARD_UNSAT:
            return OptimaResult(Status.HARD_UNSAT, 0.0, (), False)
        w_star = first.weight
        optima = [first.assignment.restrict(proj)]
        greedy = np.ones(self.formula.num_vars + 1, dtype=np.uint8)
        for v in proj:
            greedy[v] = 0
        blocks: list[tuple[int, ...]] = []
        overflow = False
        while True:
            blocks.append(tuple(-v if b else v for v, b in optima[-1]))
            status, weight, out = self._run(a, Objective.MAXIMIZE, _bb.SEARCH_FIND,
                                            w_star, greedy, blocks)
            if status != _bb.STATUS_OPTIMAL:
                break
            if len(optima) >= limit:
                overflow = True
                break
            bits = np.concatenate([[1], np.maximum(out[1:], 0)]).astype(np.int8)
            optima.append(Assignment(bits).restrict(proj))
        return OptimaResult(Status.OPTIMAL, w_star, tuple(optima), overflow)


def _occ_lists(n_vars: int, cl_start: np.ndarray, cl_lits: np.ndarray
               ) -> tuple[np.ndarray, np.ndarray]:
    """CSR over variables of signed clause references +-(ci+1)."""
    if cl_lits.size == 0:
        return np.zeros(n_vars + 2, dtype=np.int32), np.zeros(0, dtype=np.int32)
    n_cl = cl_start.size - 1
    clause_of = np.repeat(np.arange(n_cl, dtype=np.int32), np.diff(cl_start))
    vars_flat = np.abs(cl_lits)
    refs = np.where(cl_lits > 0, clause_of + 1, -(clause_of + 1)).astype(np.int32)
    order = np.argsort(vars_flat, kind="stable")
    occ_lit = refs[order]
    counts = np.bincount(vars_flat, minlength=n_vars + 1)
    occ_start = np.zeros(n_vars + 2, dtype=np.int32)
    occ_start[1:] = np.cumsum(counts)
    return occ_start, occ_lit


def solve(f: WcnfFormula, a: Assumptions | Mapping[int, int] | None = None,
          objective: Objective = Objective.MAXIMIZE) -> SolveResult:
    return Solver(f).solve(a, objective)


def enumerate_optima(f: WcnfFormula, a: Assumptions | Mapping[int, int] | None,
                     projection: Iterable[int], limit: int) -> OptimaResult:
    return Solver(f).enumerate_optima(a, projection, limit)


def brute_force_solve(f: WcnfFormula, a: Assumptions | Mapping[int, int] | None = None,
                      objective: Objective = Objective.MAXIMIZE) -> SolveResult:
    """Full enumeration oracle; refuses beyond 25 free variables.

    Ties break toward the lexicographically first free-variable pattern
    (all-zeros first), which need not match the search's tie choice.
    """
    a = a if isinstance(a, Assumptions) else Assumptions.of(a)
    n = f.num_vars
    fixed = dict(a.values)
    for v in fixed:
        if not 1 <= v <= n:
            raise ContractViolation(f"assumption variable {v} outside range")
    free = [v for v in range(1, n + 1) if v not in fixed]
    if len(free) > 25:
        raise ContractViolation(f"{len(free)} free variables exceed the brute-force cap")
    m = len(free)
    count = 1 << m
    weights = np.zeros(count)
    hard_ok = np.ones(count, dtype=bool)
    patterns = np.arange(count, dtype=np.uint64)
    values = {}
    for i, v in enumerate(free):
        values[v] = ((patterns >> np.uint64(i)) & np.uint64(1)).astype(bool)
    for wc in f.clauses:
        if wc.clause.tautology:
            sat = np.ones(count, dtype=bool)
        else:
            sat = np.zeros(count, dtype=bool)
            for lit in wc.clause.literals:
                if lit.var in fixed:
                    if bool(fixed[lit.var]) == lit.positive:
                        sat |= True
                else:
                    sat |= values[lit.var] == lit.positive
        if wc.is_hard:
            hard_ok &= sat
        else:
            weights += sat * wc.weight
    if not hard_ok.any():
        return SolveResult(Status.HARD_UNSAT, 0.0, None)
    masked = np.where(hard_ok, weights, -np.inf if objective is Objective.MAXIMIZE else np.inf)
    best = int(np.argmax(masked) if objective is Objective.MAXIMIZE else np.argmin(masked))
    bits = np.zeros(n + 1, dtype=np.int8)
    bits[0] = 1
    for v, b in fixed.items():
        bits[v] = b
    for i, v in enumerate(free):
        bits[v] = (best >> i) & 1
    return SolveResult(Status.OPTIMAL, float(weights[best]), Assignment(bits))
