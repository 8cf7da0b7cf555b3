"""Formal comparison of a decoded weighted MaxSAT formula against
ground-truth SAT rules.

Three checkers: unique functional equivalence (optimum sets are singleton
and match the expected output per input), general functional equivalence
(every optimum is a ground-truth model for every feasible input), and the
threshold sufficient condition (one weight value separating models from
non-models, certified with two optimization queries).  Plus the
prediction-versus-reference weight comparison diagnostic.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

import numpy as np

from maxeq.decode import DecodeMeta, aux_completion_clauses, complete_assignment_bits
from maxeq.formula import (
    HARD,
    Assignment,
    Clause,
    CnfFormula,
    ContractViolation,
    Literal,
    WcnfFormula,
    evaluate_cnf,
    evaluate_wcnf,
    tseitin_negate,
)
from maxeq.maxsat_solver import Assumptions, Objective, Solver, Status

THETA_MARGIN = 1e-6


class Verdict(enum.Enum):
    EQUIVALENT = "Equivalent"
    COUNTEREXAMPLE_FOUND = "CounterexampleFound"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class IoPair:
    """Partial input over defined variables with its admissible outputs.

    Expected outputs are total assignments over the defined variables
    extending the input; unique-equivalence pairs carry exactly one.
    """

    input: tuple[tuple[int, int], ...]
    expected_outputs: tuple[tuple[tuple[int, int], ...], ...]


@dataclass
class VerifyStats:
    pairs_checked: int = 0
    optima_enumerated: int = 0
    skipped_inputs: int = 0


@dataclass(frozen=True)
class Counterexample:
    pair_index: int
    input: tuple[tuple[int, int], ...]
    got: tuple
    note: str


@dataclass(frozen=True)
class VerifyReport:
    verdict: Verdict
    counterexample: Counterexample | None
    stats: VerifyStats
    theta: float | None = None

    def __post_init__(self):
        if self.verdict is Verdict.COUNTEREXAMPLE_FOUND and self.counterexample is None:
            raise ContractViolation("counterexample verdict requires a counterexample")


def _defined_projection(meta: DecodeMeta, gt: CnfFormula) -> list[int]:
    return [meta.decoded_var(v) for v in range(1, gt.num_vars + 1)]


def _chunks(seq: list, size: int) -> Iterator[list]:
    for i in range(0, len(seq), size):
        yield seq[i:i + size]


def check_unique_fe(wcnf: WcnfFormula, meta: DecodeMeta, gt: CnfFormula,
                    pairs: Iterable[IoPair], workers: int = 1) -> VerifyReport:
    """Every pair's optimum set must be a singleton equal to the expected
    output (projected to defined variables)."""
    solver = Solver(wcnf)
    proj = _defined_projection(meta, gt)
    stats = VerifyStats()
    pair_list = list(pairs)

    def run_pair(item):
        index, pair = item
        if len(pair.expected_outputs) != 1:
            raise ContractViolation("unique equivalence needs singleton expected outputs")
        eo = solver.enumerate_optima(pair.input, proj, limit=2)
        n_opt = len(eo.optima)
        if eo.status is Status.HARD_UNSAT:
            return index, n_opt, Counterexample(index, pair.input, ("hard_unsat",),
                                                "formula infeasible under input")
        expected = tuple(sorted(pair.expected_outputs[0]))
        if n_opt != 1:
            return index, n_opt, Counterexample(index, pair.input, eo.optima,
                                                f"{n_opt} optima, expected unique")
        if eo.optima[0] != expected:
            return index, n_opt, Counterexample(index, pair.input, eo.optima,
                                                "optimum differs from expected output")
        return index, n_opt, None

    counterexample = None
    items = list(enumerate(pair_list))
    if workers <= 1:
        for item in items:
            _, n_opt, ce = run_pair(item)
            stats.pairs_checked += 1
            stats.optima_enumerated += n_opt
            if ce is not None:
                counterexample = ce
                break
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for chunk in _chunks(items, max(64, workers * 16)):
                results = list(pool.map(run_pair, chunk))
                for _, n_opt, ce in results:
                    stats.pairs_checked += 1
                    stats.optima_enumerated += n_opt
                    if ce is not None and counterexample is None:
                        counterexample = ce
                if counterexample is not None:
                    break
    if counterexample is not None:
        return VerifyReport(Verdict.COUNTEREXAMPLE_FOUND, counterexample, stats)
    return VerifyReport(Verdict.EQUIVALENT, None, stats)


def check_general_fe(wcnf: WcnfFormula, meta: DecodeMeta, gt: CnfFormula,
                     inputs: Iterable[tuple[tuple[int, int], ...]],
                     workers: int = 1, optima_limit: int = 64) -> VerifyReport:
    """Every optimum must satisfy the ground truth, for every input that
    the ground truth can extend; inputs with no model extension are
    skipped and counted."""
    solver = Solver(wcnf)
    gt_solver = Solver(WcnfFormula.build(
        gt.num_vars, [(HARD, c) for c in gt.clauses]))
    proj = _defined_projection(meta, gt)
    stats = VerifyStats()

    def run_input(item):
        index, inp = item
        gt_res = gt_solver.solve(inp)
        if gt_res.status is Status.HARD_UNSAT:
            return index, 0, None, True, False
        eo = solver.enumerate_optima(inp, proj, limit=optima_limit)
        if eo.status is Status.HARD_UNSAT:
            return index, 0, Counterexample(index, inp, ("hard_unsat",),
                                            "formula infeasible while ground truth has models"), False, False
        if eo.overflow:
            return index, len(eo.optima), None, False, True
        for opt in eo.optima:
            a = Assignment.from_values(dict(opt), gt.num_vars)
            if not evaluate_cnf(gt, a):
                return index, len(eo.optima), Counterexample(
                    index, inp, opt, "optimum violates ground truth"), False, False
        return index, len(eo.optima), None, False, False

    counterexample = None
    overflowed = False
    items = list(enumerate(inputs))
    if workers <= 1:
        for item in items:
            _, n_opt, ce, skipped, over = run_input(item)
            stats.pairs_checked += 1
            stats.optima_enumerated += n_opt
            stats.skipped_inputs += 1 if skipped else 0
            if over:
                overflowed = True
                break
            if ce is not None:
                counterexample = ce
                break
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for chunk in _chunks(items, max(64, workers * 16)):
                for _, n_opt, ce, skipped, over in pool.map(run_input, chunk):
                    stats.pairs_checked += 1
                    stats.optima_enumerated += n_opt
                    stats.skipped_inputs += 1 if skipped else 0
                    if over:
                        overflowed = True
                    elif ce is not None and counterexample is None:
                        counterexample = ce
                if overflowed or counterexample is not None:
                    break
    if counterexample is not None:
        return VerifyReport(Verdict.COUNTEREXAMPLE_FOUND, counterexample, stats)
    if overflowed:
        return VerifyReport(Verdict.INCONCLUSIVE, None, stats)
    return VerifyReport(Verdict.EQUIVALENT, None, stats)


def _shift_cnf_clauses(cnf: CnfFormula, keep_below: int, shift_to: int) -> list[Clause]:
    """Clauses with auxiliary vars (above keep_below) moved above shift_to."""
    out = []
    delta = shift_to - keep_below
    for c in cnf.clauses:
        lits = tuple(
            Literal(l.var if l.var <= keep_below else l.var + delta, l.positive)
            for l in c.literals
        )
        out.append(Clause(lits))
    return out


def check_sufficient_condition(wcnf: WcnfFormula, meta: DecodeMeta,
                               gt: CnfFormula) -> VerifyReport:
    """Threshold check: the maximum weight over non-models must fall
    strictly below the minimum weight over models.

    Gadget auxiliaries are first pinned to their defining equalities so
    the weight becomes a function of the original variables; otherwise a
    model with slack auxiliaries scores arbitrarily low and no threshold
    can exist.
    """
    stats = VerifyStats()
    completion = [(HARD, c) for c in aux_completion_clauses(meta)]
    base = list(zip([wc.weight for wc in wcnf.clauses],
                    [wc.clause for wc in wcnf.clauses]))

    # minimum weight over ground-truth models
    with_gt = base + completion + [(HARD, c) for c in gt.clauses]
    f_pos = WcnfFormula.build(wcnf.num_vars, with_gt, wcnf.projection)
    r_pos = Solver(f_pos).solve(None, Objective.MINIMIZE)
    stats.pairs_checked = 2
    if r_pos.status is Status.HARD_UNSAT:
        return VerifyReport(Verdict.INCONCLUSIVE, None, stats)

    # maximum weight over non-models
    neg = tseitin_negate(gt)
    n_total = wcnf.num_vars + (neg.num_vars - gt.num_vars)
    shifted = _shift_cnf_clauses(neg, gt.num_vars, wcnf.num_vars)
    with_neg = base + completion + [(HARD, c) for c in shifted]
    f_neg = WcnfFormula.build(n_total, with_neg, wcnf.projection)
    r_neg = Solver(f_neg).solve(None, Objective.MAXIMIZE)
    if r_neg.status is Status.HARD_UNSAT:
        # no feasible non-model exists; any threshold below the models works
        return VerifyReport(Verdict.EQUIVALENT, None, stats,
                            theta=r_pos.weight - 1.0)
    if r_neg.weight < r_pos.weight - THETA_MARGIN:
        return VerifyReport(Verdict.EQUIVALENT, None, stats,
                            theta=(r_neg.weight + r_pos.weight) / 2.0)
    return VerifyReport(Verdict.INCONCLUSIVE, None, stats)


@dataclass(frozen=True)
class WeightComparison:
    predicted_weight: float
    reference_weight: float
    order: str  # '<', '=', '>' for predicted vs reference
    predicted_hard_ok: bool
    reference_hard_ok: bool


def compare_prediction_weight(wcnf: WcnfFormula, meta: DecodeMeta,
                              predicted: Mapping[int, int],
                              reference: Mapping[int, int],
                              aux_vars: Iterable[int]) -> WeightComparison:
    """Weights of two assignments sharing auxiliary values.

    Both assignments cover the original (defined + learned auxiliary)
    variables; gadget variables are completed to their defining equality
    indicators before evaluation.  Hard-clause violations are flagged
    rather than folded into the ordering.
    """
    aux = sorted(aux_vars)
    for v in aux:
        if predicted.get(v) != reference.get(v):
            raise ContractViolation(f"auxiliary variable {v} differs between assignments")
    n_orig = len(meta.var_map) if meta.var_map else max(predicted)

    def to_value(values: Mapping[int, int]) -> Assignment:
        bits = np.zeros(n_orig + 1, dtype=np.int8)
        bits[0] = 1
        for v in range(1, n_orig + 1):
            if v not in values:
                raise ContractViolation(f"assignment missing variable {v}")
            bits[v] = values[v]
        return Assignment(complete_assignment_bits(meta, bits, wcnf.num_vars))

    pv = evaluate_wcnf(wcnf, to_value(predicted))
    rv = evaluate_wcnf(wcnf, to_value(reference))
    if abs(pv.weight - rv.weight) <= THETA_MARGIN:
        order = "="
    else:
        order = "<" if pv.weight < rv.weight else ">"
    return WeightComparison(pv.weight, rv.weight, order, pv.hard_ok, rv.hard_ok)


# ---------------------------------------------------------------------------
# Report text records


def emit_report(report: VerifyReport) -> str:
    lines = [f"verdict {report.verdict.value}"]
    if report.theta is not None:
        lines.append(f"theta {report.theta!r}")
    lines.append(f"pairs_checked {report.stats.pairs_checked}")
    lines.append(f"optima_enumerated {report.stats.optima_enumerated}")
    lines.append(f"skipped_inputs {report.stats.skipped_inputs}")
    ce = report.counterexample
    if ce is not None:
        lines.append(f"counterexample_pair {ce.pair_index}")
        lines.append("counterexample_input " +
                     " ".join(f"{v}={b}" for v, b in ce.input))
        lines.append(f"counterexample_note {ce.note}")
        for got in ce.got:
            if isinstance(got, str):
                lines.append(f"counterexample_got {got}")
            else:
                lines.append("counterexample_got " +
                             " ".join(f"{v}={b}" for v, b in got))
    return "\n".join(lines) + "\n"
