"""Reductions between CNF, Max2SAT, equality-constraint formulas, the
pairwise weight matrix, and weighted MaxSAT.

This is the interpretability core: a learned weight matrix decodes into
a weighted MaxSAT formula through the equality-constraint form, and
human-written CNF rules inject into a weight matrix through the reverse
chain.  Also hosts the clause-matrix diagnostics (threshold rounding and
the quadratic-form conversion).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from maxeq.formula import (
    HARD,
    TRUTH,
    Clause,
    CnfFormula,
    ContractViolation,
    EqualityConstraint,
    Literal,
    MaxEqFormula,
    WcnfFormula,
    WeightedClause,
    clause,
)
from maxeq.sdp_layer import CMatrix, SMatrix


@dataclass(frozen=True)
class Max2SatFormula:
    """Weighted clauses of at most two literals."""

    num_vars: int
    clauses: tuple[WeightedClause, ...]

    def __post_init__(self):
        for wc in self.clauses:
            if not 1 <= len(wc.clause) <= 2:
                raise ContractViolation("Max2SAT clauses must have 1 or 2 literals")
            if wc.clause.max_var() > self.num_vars:
                raise ContractViolation("clause variable exceeds num_vars")


@dataclass(frozen=True)
class EqAuxDef:
    """Gadget variable introduced for one equality constraint.

    ``positive`` records the constraint's weight sign; either way the
    optimal gadget value is the indicator of the endpoints being equal.
    """

    var: int
    i: int
    j: int
    positive: bool


@dataclass(frozen=True)
class GadgetThreshold:
    """Best achievable gadget-group weight per source clause state."""

    source_clause: int
    weight_sat: float
    weight_unsat: float


@dataclass(frozen=True)
class DecodeMeta:
    """Bookkeeping carried across reductions: variable maps, auxiliary
    ranges, the constant weight offset, and gadget thresholds."""

    var_map: tuple[tuple[int, int], ...] = ()
    aux_vars: tuple[int, ...] = ()
    eq_aux_defs: tuple[EqAuxDef, ...] = ()
    offset: float = 0.0
    thresholds: tuple[GadgetThreshold, ...] = ()

    def decoded_var(self, original: int) -> int:
        for o, d in self.var_map:
            if o == original:
                return d
        raise KeyError(original)


# ---------------------------------------------------------------------------
# C matrix <-> equality constraints


def c_to_maxeq(C: CMatrix) -> MaxEqFormula:
    """One constraint per unordered nonzero pair; the ordered double sum
    behind the objective counts each pair twice, so the weight is -4c."""
    n1 = C.n + 1
    constraints = []
    for i in range(n1):
        for j in range(i + 1, n1):
            c = C.entries[i, j]
            if c != 0.0:
                constraints.append(EqualityConstraint(i, j, -4.0 * c))
    return MaxEqFormula(C.n, tuple(constraints))


def maxeq_from_weights(num_vars: int, weights: dict[tuple[int, int], float]) -> MaxEqFormula:
    """Build a formula from pair -> weight, merging and dropping zeros."""
    constraints = [
        EqualityConstraint(i, j, w)
        for (i, j), w in sorted(weights.items())
        if w != 0.0
    ]
    return MaxEqFormula(num_vars, tuple(constraints))


def maxeq_to_c(f: MaxEqFormula, n_d: int) -> CMatrix:
    """Inverse of c_to_maxeq: c_ij = -w_ij / 4."""
    n1 = f.num_vars + 1
    e = np.zeros((n1, n1))
    for c in f.constraints:
        e[c.i, c.j] = e[c.j, c.i] = -c.weight / 4.0
    return CMatrix(n_d, f.num_vars - n_d, e)


def maxeq_to_wcnf(f: MaxEqFormula) -> tuple[WcnfFormula, DecodeMeta]:
    """Weighted MaxSAT encoding of an equality-constraint formula.

    Each constraint between two real variables gets a fresh gadget
    variable d whose hard clauses allow d to signal equality; the sign of
    the weight picks the gadget orientation.  Constraints against the
    truth variable simplify to unit soft clauses directly.  For every
    assignment of the original variables, the best gadget extension
    satisfies soft weight equal to the equality score plus the returned
    offset (the offset absorbs negative weights).
    """
    weighted: list[tuple[object, Clause]] = []
    aux_defs = []
    offset = 0.0
    next_aux = f.num_vars + 1
    for c in f.constraints:
        w = c.weight
        if c.i == TRUTH:
            # equality with truth is just the variable itself
            if w > 0:
                weighted.append((w, clause(c.j)))
            else:
                weighted.append((-w, clause(-c.j)))
                offset += -w
            continue
        d = next_aux
        next_aux += 1
        aux_defs.append(EqAuxDef(d, c.i, c.j, w > 0))
        a, b = c.i, c.j
        if w > 0:
            weighted.append((HARD, clause(-a, b, -d)))
            weighted.append((HARD, clause(a, -b, -d)))
            weighted.append((w, clause(d)))
        else:
            weighted.append((HARD, clause(-a, -b, d)))
            weighted.append((HARD, clause(a, b, d)))
            weighted.append((-w, clause(-d)))
            offset += -w
    wcnf = WcnfFormula.build(next_aux - 1, weighted,
                             projection=range(1, f.num_vars + 1))
    meta = DecodeMeta(
        var_map=tuple((v, v) for v in range(1, f.num_vars + 1)),
        aux_vars=tuple(d.var for d in aux_defs),
        eq_aux_defs=tuple(aux_defs),
        offset=offset,
    )
    return wcnf, meta


def aux_completion_clauses(meta: DecodeMeta) -> list[Clause]:
    """Hard clauses pinning each gadget variable to the equality indicator.

    The decode gadgets only constrain one implication direction, leaving
    slack extensions with lower weight; adding these makes the soft weight
    a function of the original variables.
    """
    out = []
    for d in meta.eq_aux_defs:
        if d.positive:
            # gadget has d -> (i = j); add (i = j) -> d
            out.append(clause(-d.i, -d.j, d.var))
            out.append(clause(d.i, d.j, d.var))
        else:
            # gadget has (i = j) -> d; add d -> (i = j)
            out.append(clause(-d.var, -d.i, d.j))
            out.append(clause(-d.var, d.i, -d.j))
    return out


def complete_assignment_bits(meta: DecodeMeta, bits: np.ndarray, num_wcnf_vars: int) -> np.ndarray:
    """Extend original-variable bits with the forced gadget values."""
    full = np.zeros(num_wcnf_vars + 1, dtype=np.int8)
    full[0] = 1
    full[1:bits.size] = bits[1:]
    for d in meta.eq_aux_defs:
        full[d.var] = 1 if full[d.i] == full[d.j] else 0
    return full


# ---------------------------------------------------------------------------
# Max2SAT -> equality constraints

# Weights (pair, first-to-truth, second-to-truth) per polarity pattern,
# derived by requiring every satisfying assignment of the source clause to
# score exactly 2w above the falsifying one.
_GADGET_SIGNS = {
    (True, True): (-1.0, 1.0, 1.0),
    (False, True): (1.0, -1.0, 1.0),
    (True, False): (1.0, 1.0, -1.0),
    (False, False): (-1.0, -1.0, -1.0),
}


def max2sat_to_maxeq(f: Max2SatFormula) -> MaxEqFormula:
    """Three equality constraints per binary clause, one per unit clause;
    constraints landing on the same pair merge by weight addition."""
    weights: dict[tuple[int, int], float] = {}

    def add(i: int, j: int, w: float) -> None:
        key = (i, j) if i < j else (j, i)
        weights[key] = weights.get(key, 0.0) + w

    for wc in f.clauses:
        if wc.is_hard:
            raise ContractViolation("hard clauses cannot convert to equality form")
        w = wc.weight
        lits = wc.clause.literals
        if wc.clause.tautology:
            continue
        if len(lits) == 1:
            add(TRUTH, lits[0].var, w if lits[0].positive else -w)
            continue
        pa, pb = lits[0].positive, lits[1].positive
        sp, sa, sb = _GADGET_SIGNS[(pa, pb)]
        add(lits[0].var, lits[1].var, sp * w)
        add(TRUTH, lits[0].var, sa * w)
        add(TRUTH, lits[1].var, sb * w)
    return maxeq_from_weights(f.num_vars, weights)


# ---------------------------------------------------------------------------
# CNF -> Max2SAT

# The 10-clause translation of a ternary clause (x v y v z) with fresh d:
# units x, y, z, d and pairs on their conflicts; 7 of 10 are satisfiable
# exactly when the source clause holds, else 6.
def _ternary_gadget(x: Literal, y: Literal, z: Literal, d: int, w: float
                    ) -> list[tuple[float, Clause]]:
    dl = Literal(d)
    return [
        (w, Clause((x,))),
        (w, Clause((y,))),
        (w, Clause((z,))),
        (w, Clause((dl,))),
        (w, Clause((-x, -y))),
        (w, Clause((-y, -z))),
        (w, Clause((-x, -z))),
        (w, Clause((x, -dl))),
        (w, Clause((y, -dl))),
        (w, Clause((z, -dl))),
    ]


def cnf_to_max2sat(f: CnfFormula, base_weight: float = 1.0
                   ) -> tuple[Max2SatFormula, DecodeMeta]:
    """Reduce arbitrary-width CNF to weighted binary clauses.

    Clauses of width one or two pass through at the base weight.  Wider
    clauses split into ternary links through chain auxiliaries, and each
    ternary link expands into the classic ten-clause construction with a
    fresh auxiliary.  Thresholds record, per source clause, the total
    gadget weight achievable when it is satisfied versus not.
    """
    if base_weight <= 0:
        raise ContractViolation("base_weight must be > 0")
    out: list[tuple[float, Clause]] = []
    aux = []
    thresholds = []
    next_aux = f.num_vars + 1
    for ci, c in enumerate(f.clauses):
        if c.tautology:
            continue
        lits = list(c.literals)
        if len(lits) == 0:
            raise ContractViolation("empty clause cannot be reduced")
        if len(lits) <= 2:
            out.append((base_weight, c))
            thresholds.append(GadgetThreshold(ci, base_weight, 0.0))
            continue
        # chain split into ternary links
        links = []
        rest = lits
        while len(rest) > 3:
            a = Literal(next_aux)
            aux.append(next_aux)
            next_aux += 1
            links.append((rest[0], rest[1], a))
            rest = [-a] + rest[2:]
        links.append((rest[0], rest[1], rest[2]))
        total_sat = 0.0
        for (x, y, z) in links:
            d = next_aux
            aux.append(d)
            next_aux += 1
            out.extend(_ternary_gadget(x, y, z, d, base_weight))
            total_sat += 7.0 * base_weight
        thresholds.append(GadgetThreshold(ci, total_sat, total_sat - base_weight))
    m2s = Max2SatFormula(next_aux - 1, tuple(WeightedClause(w, c) for w, c in out))
    meta = DecodeMeta(
        var_map=tuple((v, v) for v in range(1, f.num_vars + 1)),
        aux_vars=tuple(aux),
        thresholds=tuple(thresholds),
    )
    return m2s, meta


def rules_to_c(f: CnfFormula, base_weight: float) -> tuple[CMatrix, DecodeMeta]:
    """Inject CNF rules into a pairwise weight matrix through the
    Max2SAT and equality-constraint reductions."""
    m2s, meta = cnf_to_max2sat(f, base_weight)
    meq = max2sat_to_maxeq(m2s)
    return maxeq_to_c(meq, f.num_vars), meta


# ---------------------------------------------------------------------------
# Clause matrix diagnostics


def s_to_c(S: SMatrix) -> CMatrix:
    """Gram matrix of the clause matrix in canonical zero-diagonal form."""
    return CMatrix.from_raw(S.n_d, S.n_a, S.entries.T @ S.entries)


def round_s(S: SMatrix, epsilon: float) -> SMatrix:
    """Elementwise threshold-sign: entries within epsilon of zero vanish."""
    if epsilon < 0:
        raise ContractViolation("epsilon must be >= 0")
    e = S.entries
    t = np.where(np.abs(e) > epsilon, np.sign(e), 0.0)
    return SMatrix(S.n_d, S.n_a, t)


def ternary_s_to_wcnf(S: SMatrix) -> WcnfFormula:
    """Clause rows of a ternary matrix as a uniform-weight MaxSAT formula.

    Column 0 is the truth coefficient: a +1 there satisfies the row
    outright (dropped), a -1 contributes a false literal (ignored).
    Rows with no remaining literals would be unsatisfiable soft clauses
    and are skipped.
    """
    e = S.entries
    if not np.all(np.isin(e, (-1.0, 0.0, 1.0))):
        raise ContractViolation("S must be ternary; apply round_s first")
    weighted = []
    for row in e:
        if row[0] == 1.0:
            continue
        lits = [int(j) if row[j] > 0 else -int(j)
                for j in range(1, row.size) if row[j] != 0.0]
        if lits:
            weighted.append((1.0, Clause.from_ints(lits)))
    return WcnfFormula.build(S.n_d + S.n_a, weighted,
                             projection=range(1, S.n_d + 1))


# ---------------------------------------------------------------------------
# Meta sidecar text format


def emit_meta(meta: DecodeMeta) -> str:
    lines = [f"offset {meta.offset!r}"]
    for o, d in meta.var_map:
        lines.append(f"var {o} {d}")
    for a in meta.aux_vars:
        lines.append(f"aux {a}")
    for d in meta.eq_aux_defs:
        lines.append(f"eqaux {d.var} {d.i} {d.j} {1 if d.positive else 0}")
    for t in meta.thresholds:
        lines.append(f"threshold {t.source_clause} {t.weight_sat!r} {t.weight_unsat!r}")
    return "\n".join(lines) + "\n"


def parse_meta(text: str) -> DecodeMeta:
    offset = 0.0
    var_map = []
    aux = []
    eq_defs = []
    thresholds = []
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "offset":
            offset = float(parts[1])
        elif parts[0] == "var":
            var_map.append((int(parts[1]), int(parts[2])))
        elif parts[0] == "aux":
            aux.append(int(parts[1]))
        elif parts[0] == "eqaux":
            eq_defs.append(EqAuxDef(int(parts[1]), int(parts[2]), int(parts[3]),
                                    parts[4] == "1"))
        elif parts[0] == "threshold":
            thresholds.append(GadgetThreshold(int(parts[1]), float(parts[2]),
                                              float(parts[3])))
        else:
            raise ContractViolation(f"unknown meta record {parts[0]!r}")
    return DecodeMeta(tuple(var_map), tuple(aux), tuple(eq_defs), offset,
                      tuple(thresholds))
