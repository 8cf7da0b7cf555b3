"""Propositional formula types and their semantics.

Covers plain CNF, weighted CNF (hard + soft clauses), and weighted
equality-constraint formulas over variable pairs, plus CNF negation via
auxiliary encoding and WDIMACS text I/O.

Variable indexing is 1-based everywhere.  The distinguished always-true
variable is not given an index of its own; equality constraints refer to
it with the sentinel ``TRUTH`` (= 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

# Endpoint marker for the always-true variable in equality constraints.
TRUTH = 0


class ContractViolation(ValueError):
    """An operation was called with inputs breaking its contract."""


class WdimacsParseError(ValueError):
    """Malformed WDIMACS input."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class _Hard:
    """Singleton marker for hard clause weights."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "HARD"


HARD = _Hard()


@dataclass(frozen=True, order=True)
class Literal:
    var: int
    positive: bool = True

    def __post_init__(self):
        if self.var < 1:
            raise ContractViolation(f"variable index must be >= 1, got {self.var}")

    def __neg__(self) -> "Literal":
        return Literal(self.var, not self.positive)

    def to_int(self) -> int:
        return self.var if self.positive else -self.var

    @classmethod
    def from_int(cls, lit: int) -> "Literal":
        if lit == 0:
            raise ContractViolation("0 is not a literal")
        return cls(abs(lit), lit > 0)


@dataclass(frozen=True)
class Clause:
    """Disjunction of literals.

    Duplicate literals are removed at construction; a clause holding both
    polarities of some variable is kept but flagged as a tautology.
    """

    literals: tuple[Literal, ...]
    tautology: bool = field(init=False, default=False)

    def __post_init__(self):
        seen: set[tuple[int, bool]] = set()
        vars_seen: dict[int, bool] = {}
        uniq: list[Literal] = []
        taut = False
        for lit in self.literals:
            key = (lit.var, lit.positive)
            if key in seen:
                continue
            seen.add(key)
            if lit.var in vars_seen and vars_seen[lit.var] != lit.positive:
                taut = True
            vars_seen[lit.var] = lit.positive
            uniq.append(lit)
        object.__setattr__(self, "literals", tuple(uniq))
        object.__setattr__(self, "tautology", taut)

    def __len__(self) -> int:
        return len(self.literals)

    def max_var(self) -> int:
        return max((l.var for l in self.literals), default=0)

    def to_ints(self) -> tuple[int, ...]:
        return tuple(l.to_int() for l in self.literals)

    @classmethod
    def from_ints(cls, lits: Iterable[int]) -> "Clause":
        return cls(tuple(Literal.from_int(l) for l in lits))


def clause(*lits: int) -> Clause:
    """Build a clause from signed integer literals."""
    return Clause.from_ints(lits)


@dataclass(frozen=True)
class CnfFormula:
    num_vars: int
    clauses: tuple[Clause, ...]

    def __post_init__(self):
        for c in self.clauses:
            if c.max_var() > self.num_vars:
                raise ContractViolation(
                    f"clause mentions variable {c.max_var()} > num_vars {self.num_vars}"
                )

    @classmethod
    def from_ints(cls, num_vars: int, clause_ints: Iterable[Iterable[int]]) -> "CnfFormula":
        return cls(num_vars, tuple(Clause.from_ints(c) for c in clause_ints))


@dataclass(frozen=True)
class WeightedClause:
    """Clause with a positive finite weight or the HARD marker."""

    weight: object  # float or HARD
    clause: Clause

    def __post_init__(self):
        if not self.is_hard:
            w = float(self.weight)
            if not np.isfinite(w) or w <= 0.0:
                raise ContractViolation(f"soft weight must be finite and > 0, got {self.weight}")
            object.__setattr__(self, "weight", w)

    @property
    def is_hard(self) -> bool:
        return self.weight is HARD


@dataclass(frozen=True)
class WcnfFormula:
    """Weighted MaxSAT formula: hard clauses must hold, satisfied soft
    clauses contribute their weight.

    ``projection`` marks the non-auxiliary variables, i.e. the ones a
    solution is reported over.
    """

    num_vars: int
    clauses: tuple[WeightedClause, ...]
    projection: frozenset[int]

    def __post_init__(self):
        for wc in self.clauses:
            if wc.clause.max_var() > self.num_vars:
                raise ContractViolation("clause variable exceeds num_vars")
        if not all(1 <= v <= self.num_vars for v in self.projection):
            raise ContractViolation("projection outside variable range")

    @classmethod
    def build(
        cls,
        num_vars: int,
        weighted: Iterable[tuple[object, Clause]],
        projection: Iterable[int] | None = None,
    ) -> "WcnfFormula":
        """Construct, dropping zero-weight soft clauses."""
        kept = []
        for w, c in weighted:
            if w is not HARD and float(w) == 0.0:
                continue
            kept.append(WeightedClause(w, c))
        proj = frozenset(projection) if projection is not None else frozenset(range(1, num_vars + 1))
        return cls(num_vars, tuple(kept), proj)

    def hard_clauses(self) -> Iterator[Clause]:
        return (wc.clause for wc in self.clauses if wc.is_hard)

    def soft_clauses(self) -> Iterator[WeightedClause]:
        return (wc for wc in self.clauses if not wc.is_hard)

    def total_soft_weight(self) -> float:
        return sum(wc.weight for wc in self.soft_clauses())


@dataclass(frozen=True)
class EqualityConstraint:
    """Weighted reward for two endpoints taking equal values.

    Endpoints are variable indices, or TRUTH (0) for the always-true
    variable.  Stored with i < j.
    """

    i: int
    j: int
    weight: float

    def __post_init__(self):
        if self.i == self.j:
            raise ContractViolation("equality endpoints must differ")
        if self.i > self.j:
            lo, hi = self.j, self.i
            object.__setattr__(self, "i", lo)
            object.__setattr__(self, "j", hi)
        if self.i < 0:
            raise ContractViolation("negative endpoint index")
        object.__setattr__(self, "weight", float(self.weight))


@dataclass(frozen=True)
class MaxEqFormula:
    """Conjunction of weighted equality constraints, to be maximized.

    ``num_vars`` excludes the truth variable.
    """

    num_vars: int
    constraints: tuple[EqualityConstraint, ...]

    def __post_init__(self):
        pairs = set()
        for c in self.constraints:
            if c.j > self.num_vars:
                raise ContractViolation("constraint endpoint exceeds num_vars")
            if (c.i, c.j) in pairs:
                raise ContractViolation(f"duplicate constraint on pair ({c.i}, {c.j})")
            pairs.add((c.i, c.j))


class Assignment:
    """Total 0/1 assignment over variables 1..num_vars.

    Index 0 is the always-true variable and is fixed to 1.
    """

    __slots__ = ("bits",)

    def __init__(self, bits: np.ndarray):
        bits = np.asarray(bits, dtype=np.int8)
        if bits.ndim != 1 or bits.size < 1 or bits[0] != 1:
            raise ContractViolation("assignment bits must be 1-d with bits[0] == 1")
        if not np.all((bits == 0) | (bits == 1)):
            raise ContractViolation("assignment values must be 0 or 1")
        self.bits = bits

    @classmethod
    def from_values(cls, values: Mapping[int, int] | Sequence[int], num_vars: int) -> "Assignment":
        bits = np.zeros(num_vars + 1, dtype=np.int8)
        bits[0] = 1
        if isinstance(values, Mapping):
            if set(values.keys()) != set(range(1, num_vars + 1)):
                raise ContractViolation("assignment must be total over 1..num_vars")
            for v, b in values.items():
                bits[v] = b
        else:
            if len(values) != num_vars:
                raise ContractViolation("assignment must be total over 1..num_vars")
            bits[1:] = np.asarray(values, dtype=np.int8)
        return cls(bits)

    @property
    def num_vars(self) -> int:
        return self.bits.size - 1

    def value(self, var: int) -> int:
        return int(self.bits[var])

    def __getitem__(self, var: int) -> int:
        return int(self.bits[var])

    def literal_true(self, lit: Literal) -> bool:
        return bool(self.bits[lit.var]) == lit.positive

    def restrict(self, variables: Iterable[int]) -> tuple[tuple[int, int], ...]:
        return tuple((v, int(self.bits[v])) for v in sorted(variables))

    def to_dict(self) -> dict[int, int]:
        return {v: int(self.bits[v]) for v in range(1, self.num_vars + 1)}

    def __eq__(self, other) -> bool:
        return isinstance(other, Assignment) and np.array_equal(self.bits, other.bits)

    def __hash__(self) -> int:
        return hash(self.bits.tobytes())

    def __repr__(self) -> str:
        return f"Assignment({''.join(str(int(b)) for b in self.bits[1:])})"


@dataclass(frozen=True)
class WcnfValue:
    hard_ok: bool
    weight: float


def _check_total(a: Assignment, num_vars: int) -> None:
    if a.num_vars < num_vars:
        raise ContractViolation(
            f"assignment covers {a.num_vars} variables, formula needs {num_vars}"
        )


def evaluate_cnf(formula: CnfFormula, a: Assignment) -> bool:
    """True iff every clause has a satisfied literal."""
    _check_total(a, formula.num_vars)
    for c in formula.clauses:
        if c.tautology:
            continue
        if not any(a.literal_true(l) for l in c.literals):
            return False
    return True


def evaluate_wcnf(formula: WcnfFormula, a: Assignment) -> WcnfValue:
    """Hard-clause satisfaction flag plus total satisfied soft weight."""
    _check_total(a, formula.num_vars)
    hard_ok = True
    weight = 0.0
    for wc in formula.clauses:
        sat = wc.clause.tautology or any(a.literal_true(l) for l in wc.clause.literals)
        if wc.is_hard:
            hard_ok = hard_ok and sat
        elif sat:
            weight += wc.weight
    return WcnfValue(hard_ok, weight)


def evaluate_maxeq(formula: MaxEqFormula, a: Assignment) -> float:
    """Sum of constraint weights whose endpoints agree (truth fixed to 1)."""
    _check_total(a, formula.num_vars)
    total = 0.0
    for c in formula.constraints:
        if a.bits[c.i] == a.bits[c.j]:
            total += c.weight
    return total


def tseitin_negate(formula: CnfFormula) -> CnfFormula:
    """CNF over the original variables plus fresh auxiliaries whose models,
    projected to the original variables, are exactly the non-models of the
    input.

    Each non-tautological clause gets an auxiliary defined (in both
    directions) as "this clause is falsified"; the negation asserts that at
    least one auxiliary holds.  The biconditional makes the auxiliary values
    a function of the original variables, so projection has multiplicity 1.
    """
    out: list[Clause] = []
    aux_lits: list[Literal] = []
    next_aux = formula.num_vars + 1
    for c in formula.clauses:
        if c.tautology:
            continue
        a = Literal(next_aux)
        next_aux += 1
        aux_lits.append(a)
        # a -> every literal of c false
        for lit in c.literals:
            out.append(Clause((-a, -lit)))
        # not a -> c satisfied
        out.append(Clause((a,) + c.literals))
    # at least one clause falsified; empty disjunction = contradiction
    out.append(Clause(tuple(aux_lits)))
    return CnfFormula(next_aux - 1, tuple(out))


def wdimacs_emit(formula: WcnfFormula, scale: float) -> bytes:
    """Serialize to classic WDIMACS.

    Soft weights are quantized to max(1, round(w * scale)); the top weight
    is 1 + the sum of quantized soft weights and marks hard clauses.  A
    comment warning record is emitted when two distinct input weights
    collide after quantization.
    """
    if scale <= 0:
        raise ContractViolation("scale must be > 0")
    soft = [wc for wc in formula.clauses if not wc.is_hard]
    quantized = [max(1, round(wc.weight * scale)) for wc in soft]
    top = 1 + sum(quantized)
    by_q: dict[int, set[float]] = {}
    for wc, q in zip(soft, quantized):
        by_q.setdefault(q, set()).add(wc.weight)
    collisions = sorted((q, sorted(ws)) for q, ws in by_q.items() if len(ws) > 1)

    lines = [f"p wcnf {formula.num_vars} {len(formula.clauses)} {top}"]
    for q, ws in collisions:
        joined = " ".join(repr(w) for w in ws)
        lines.append(f"c warning: weights {joined} collide at quantized weight {q}")
    qi = iter(quantized)
    for wc in formula.clauses:
        w = top if wc.is_hard else next(qi)
        lits = " ".join(str(l) for l in wc.clause.to_ints())
        lines.append(f"{w} {lits} 0".replace("  ", " "))
    return ("\n".join(lines) + "\n").encode("ascii")


def dimacs_cnf_parse(data: bytes | str) -> CnfFormula:
    """Parse classic DIMACS CNF (for plain rule files)."""
    text = data.decode("ascii") if isinstance(data, bytes) else data
    num_vars = None
    clauses = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s.startswith("c"):
            continue
        if s.startswith("p"):
            parts = s.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise WdimacsParseError(line_no, f"bad header {s!r}")
            num_vars = int(parts[2])
            continue
        if num_vars is None:
            raise WdimacsParseError(line_no, "clause before header")
        tokens = [int(t) for t in s.split()]
        if not tokens or tokens[-1] != 0:
            raise WdimacsParseError(line_no, "clause not terminated by 0")
        clauses.append(Clause.from_ints(tokens[:-1]))
    if num_vars is None:
        raise WdimacsParseError(0, "missing header")
    return CnfFormula(num_vars, tuple(clauses))


def dimacs_cnf_emit(formula: CnfFormula) -> bytes:
    lines = [f"p cnf {formula.num_vars} {len(formula.clauses)}"]
    for c in formula.clauses:
        lines.append(" ".join(str(l) for l in c.to_ints()) + " 0")
    return ("\n".join(lines) + "\n").encode("ascii")


def wdimacs_parse(data: bytes | str) -> WcnfFormula:
    """Parse classic WDIMACS; weight == top means hard."""
    text = data.decode("ascii") if isinstance(data, bytes) else data
    num_vars = top = expected = None
    weighted: list[tuple[object, Clause]] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s.startswith("c"):
            continue
        if s.startswith("p"):
            if num_vars is not None:
                raise WdimacsParseError(line_no, "duplicate header")
            parts = s.split()
            if len(parts) != 5 or parts[1] != "wcnf":
                raise WdimacsParseError(line_no, f"bad header {s!r}")
            try:
                num_vars, expected, top = int(parts[2]), int(parts[3]), int(parts[4])
            except ValueError:
                raise WdimacsParseError(line_no, "non-integer header field") from None
            continue
        if num_vars is None:
            raise WdimacsParseError(line_no, "clause before header")
        try:
            tokens = [int(t) for t in s.split()]
        except ValueError:
            raise WdimacsParseError(line_no, "non-integer token") from None
        if len(tokens) < 2 or tokens[-1] != 0:
            raise WdimacsParseError(line_no, "clause not terminated by 0")
        w, lits = tokens[0], tokens[1:-1]
        if w <= 0:
            raise WdimacsParseError(line_no, f"non-positive weight {w}")
        if w > top:
            raise WdimacsParseError(line_no, f"weight {w} exceeds top {top}")
        if any(abs(l) > num_vars for l in lits):
            raise WdimacsParseError(line_no, "literal outside variable range")
        weight: object = HARD if w == top else float(w)
        weighted.append((weight, Clause.from_ints(lits)))
    if num_vars is None:
        raise WdimacsParseError(0, "missing header")
    if len(weighted) != expected:
        raise WdimacsParseError(0, f"header announced {expected} clauses, found {len(weighted)}")
    return WcnfFormula.build(num_vars, weighted)
