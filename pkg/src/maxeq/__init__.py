"""Differentiable MaxSAT rule learning, decoding, exact solving, and
formal verification against ground-truth rules."""

from maxeq.formula import (
    HARD,
    TRUTH,
    Assignment,
    Clause,
    CnfFormula,
    ContractViolation,
    EqualityConstraint,
    Literal,
    MaxEqFormula,
    WcnfFormula,
    WeightedClause,
    clause,
    evaluate_cnf,
    evaluate_maxeq,
    evaluate_wcnf,
    tseitin_negate,
    wdimacs_emit,
    wdimacs_parse,
)

__all__ = [
    "HARD",
    "TRUTH",
    "Assignment",
    "Clause",
    "CnfFormula",
    "ContractViolation",
    "EqualityConstraint",
    "Literal",
    "MaxEqFormula",
    "WcnfFormula",
    "WeightedClause",
    "clause",
    "evaluate_cnf",
    "evaluate_maxeq",
    "evaluate_wcnf",
    "tseitin_negate",
    "wdimacs_emit",
    "wdimacs_parse",
]
