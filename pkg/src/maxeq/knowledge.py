"""Domain knowledge incorporation.

Two equivalent routes: conjoin extra rules onto a decoded formula as hard
clauses, or compile them into an additive weight matrix applied to the
learned weights before inference (weight repair).
"""

from __future__ import annotations

import numpy as np

from maxeq.decode import DecodeMeta, rules_to_c
from maxeq.formula import (
    HARD,
    CnfFormula,
    ContractViolation,
    WcnfFormula,
)
from maxeq.sdp_layer import CMatrix


def conjoin_symbolic(wcnf: WcnfFormula, domain: CnfFormula) -> WcnfFormula:
    """Append domain rules as hard clauses."""
    max_var = max((c.max_var() for c in domain.clauses), default=0)
    if any(v not in wcnf.projection for v in range(1, max_var + 1)
           if any(l.var == v for c in domain.clauses for l in c.literals)):
        raise ContractViolation("domain variables must lie in the formula projection")
    weighted = [(wc.weight, wc.clause) for wc in wcnf.clauses]
    weighted += [(HARD, c) for c in domain.clauses]
    return WcnfFormula.build(wcnf.num_vars, weighted, wcnf.projection)


def compile_delta_c(domain: CnfFormula, base_weight: float,
                    target_shape: tuple[int, int]) -> CMatrix:
    """Domain rules as an additive weight matrix at the target shape.

    Reduction auxiliaries are placed at the top of the auxiliary range so
    they stay clear of the learned ones; the range must be large enough
    to hold them.
    """
    n_d, n_a = target_shape
    if domain.num_vars > n_d:
        raise ContractViolation("domain variables exceed the defined range")
    delta, meta = rules_to_c(domain, base_weight)
    n_aux_needed = delta.n_a
    if n_aux_needed > n_a:
        raise ContractViolation(
            f"reduction needs {n_aux_needed} auxiliaries, target range has {n_a}")
    n1 = n_d + n_a + 1
    out = np.zeros((n1, n1))

    def remap(idx: int) -> int:
        # matrix row 0 = truth, rows 1..n_dom = domain vars, rest = aux
        if idx <= domain.num_vars:
            return idx
        return idx - domain.num_vars + n_d + (n_a - n_aux_needed)

    src = delta.entries
    for i in range(src.shape[0]):
        for j in range(src.shape[1]):
            if src[i, j] != 0.0:
                out[remap(i), remap(j)] = src[i, j]
    return CMatrix(n_d, n_a, out)


def default_repair_weight(c: CMatrix) -> float:
    """Ten times the largest learned magnitude, so compiled knowledge
    dominates learned soft preferences without becoming infinite."""
    peak = float(np.max(np.abs(c.entries))) if c.entries.size else 0.0
    return 10.0 * peak if peak > 0 else 10.0


def add_knowledge(c: CMatrix, domain: CnfFormula, base_weight: float | None = None,
                  extra_aux: int | None = None) -> CMatrix:
    """Learned weights plus compiled domain knowledge.

    The auxiliary range grows by the reduction's needs (or extra_aux when
    given); learned entries keep their positions.
    """
    if base_weight is None:
        base_weight = default_repair_weight(c)
    probe, _ = rules_to_c(domain, base_weight)
    need = probe.n_a if extra_aux is None else extra_aux
    n_a_new = c.n_a + need
    delta = compile_delta_c(domain, base_weight, (c.n_d, n_a_new))
    n1_new = c.n_d + n_a_new + 1
    grown = np.zeros((n1_new, n1_new))
    old = c.n + 1
    grown[:old, :old] = c.entries
    return CMatrix(c.n_d, n_a_new, grown + delta.entries)


def cell_uniqueness_cnf() -> CnfFormula:
    """At most one value per cell of the 4x4 one-hot board."""
    from maxeq.formula import clause as mk
    from maxeq.tasks import sudoku4_var

    clauses = []
    for cell in range(16):
        for v1 in range(4):
            for v2 in range(v1 + 1, 4):
                clauses.append(mk(-sudoku4_var(cell, v1), -sudoku4_var(cell, v2)))
    return CnfFormula(64, tuple(clauses))
