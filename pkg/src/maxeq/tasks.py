"""Dataset generators and ground-truth CNF encoders.

Tasks: prefix parity over a bit stream, binary addition with a carry
chain, symbol counting modulo k with a one-hot state chain, and 4x4
Sudoku with one-hot cell encoding.

Stream layouts (all indices 1-based):

  parity(L):   inputs b_1..b_L at 1..L, outputs o_1..o_{L-1} at L+1..2L-1
               with o_i = b_1 xor ... xor b_{i+1}.
  addition(L): operands x at 1..L and y at L+1..2L (LSB first), sum bits
               s at 2L+1..3L, carries c at 3L+1..4L.  All sum and carry
               bits are outputs; c_L is the final carry.
  count(L,k):  inputs at 1..L, then L one-hot state blocks of width k;
               block t encodes (number of ones among the first t bits)
               mod k.  The final block is the task output; every state
               bit is supervised.
  sudoku4:     64 variables, var = 4*cell + value + 1 for cell 0..15 in
               row-major order and value 0..3.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Iterable, Iterator

import numpy as np

from maxeq.formula import Assignment, Clause, CnfFormula, ContractViolation, clause


@dataclass(frozen=True)
class TaskSpec:
    """Task descriptor: kind plus its size parameters."""

    kind: str  # parity | addition | count | sudoku4
    length: int = 0
    modulus: int = 0

    def __post_init__(self):
        if self.kind not in ("parity", "addition", "count", "sudoku4"):
            raise ContractViolation(f"unknown task kind {self.kind!r}")
        if self.kind in ("parity", "addition", "count") and self.length < 2:
            raise ContractViolation("stream length must be >= 2")
        if self.kind == "count" and self.modulus < 2:
            raise ContractViolation("count modulus must be >= 2")

    @property
    def num_defined(self) -> int:
        if self.kind == "parity":
            return 2 * self.length - 1
        if self.kind == "addition":
            return 4 * self.length
        if self.kind == "count":
            return self.length * (1 + self.modulus)
        return 64

    def default_aux(self) -> int:
        if self.kind == "parity":
            return self.length
        if self.kind == "addition":
            return 2 * self.length
        if self.kind == "count":
            return 2 * self.modulus
        return 16

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, "length": self.length, "modulus": self.modulus})

    @classmethod
    def from_json(cls, text: str) -> "TaskSpec":
        d = json.loads(text)
        return cls(d["kind"], d.get("length", 0), d.get("modulus", 0))


@dataclass(frozen=True)
class Example:
    """One input/output pair: disjoint variable index sets with values."""

    input_vars: tuple[tuple[int, int], ...]   # (var, bit)
    output_vars: tuple[tuple[int, int], ...]

    def __post_init__(self):
        ins = {v for v, _ in self.input_vars}
        outs = {v for v, _ in self.output_vars}
        if ins & outs:
            raise ContractViolation("input and output variable sets overlap")

    def full_assignment(self, num_vars: int) -> Assignment:
        bits = np.zeros(num_vars + 1, dtype=np.int8)
        bits[0] = 1
        for v, b in self.input_vars:
            bits[v] = b
        for v, b in self.output_vars:
            bits[v] = b
        return Assignment(bits)


@dataclass(frozen=True)
class Dataset:
    n_d: int
    examples: tuple[Example, ...]
    task: TaskSpec
    split: str = "all"

    def __len__(self) -> int:
        return len(self.examples)


def _parity_outputs(bits: np.ndarray) -> np.ndarray:
    return np.bitwise_xor.accumulate(bits)[1:]


def _addition_outputs(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    L = x.size
    s = np.zeros(L, dtype=np.int8)
    c = np.zeros(L, dtype=np.int8)
    carry = 0
    for i in range(L):
        t = int(x[i]) + int(y[i]) + carry
        s[i] = t & 1
        carry = t >> 1
        c[i] = carry
    return s, c


def _count_states(bits: np.ndarray, k: int) -> np.ndarray:
    """One-hot state per prefix: (ones in first t bits) mod k, t = 1..L."""
    L = bits.size
    states = np.zeros((L, k), dtype=np.int8)
    acc = 0
    for t in range(L):
        acc = (acc + int(bits[t])) % k
        states[t, acc] = 1
    return states


def gen_stream(task: TaskSpec, n_samples: int, seed: int) -> Dataset:
    """Uniform random input bits; outputs computed exactly."""
    if task.kind not in ("parity", "addition", "count"):
        raise ContractViolation("gen_stream handles stream tasks only")
    rng = np.random.default_rng(seed)
    L = task.length
    examples = []
    for _ in range(n_samples):
        if task.kind == "parity":
            b = rng.integers(0, 2, size=L, dtype=np.int8)
            outs = _parity_outputs(b)
            inp = tuple((i + 1, int(b[i])) for i in range(L))
            out = tuple((L + 1 + i, int(outs[i])) for i in range(L - 1))
        elif task.kind == "addition":
            x = rng.integers(0, 2, size=L, dtype=np.int8)
            y = rng.integers(0, 2, size=L, dtype=np.int8)
            s, c = _addition_outputs(x, y)
            inp = tuple((i + 1, int(x[i])) for i in range(L)) + tuple(
                (L + i + 1, int(y[i])) for i in range(L)
            )
            out = tuple((2 * L + i + 1, int(s[i])) for i in range(L)) + tuple(
                (3 * L + i + 1, int(c[i])) for i in range(L)
            )
        else:
            k = task.modulus
            b = rng.integers(0, 2, size=L, dtype=np.int8)
            states = _count_states(b, k)
            inp = tuple((i + 1, int(b[i])) for i in range(L))
            out = tuple(
                (L + t * k + v + 1, int(states[t, v])) for t in range(L) for v in range(k)
            )
        examples.append(Example(inp, out))
    return Dataset(task.num_defined, tuple(examples), task)


# ---------------------------------------------------------------------------
# 4x4 Sudoku


def sudoku4_var(cell: int, value: int) -> int:
    return 4 * cell + value + 1


def _enumerate_grids() -> np.ndarray:
    """All completed 4x4 grids as (n, 16) value arrays, lexicographic order."""
    grids = []
    grid = np.full(16, -1, dtype=np.int8)

    def blocked(cell: int, val: int) -> bool:
        r, c = divmod(cell, 4)
        for cc in range(4):
            if grid[r * 4 + cc] == val:
                return True
        for rr in range(4):
            if grid[rr * 4 + c] == val:
                return True
        br, bc = (r // 2) * 2, (c // 2) * 2
        for rr in range(br, br + 2):
            for cc in range(bc, bc + 2):
                if grid[rr * 4 + cc] == val:
                    return True
        return False

    def rec(cell: int):
        if cell == 16:
            grids.append(grid.copy())
            return
        for val in range(4):
            if not blocked(cell, val):
                grid[cell] = val
                rec(cell + 1)
                grid[cell] = -1

    rec(0)
    return np.stack(grids)


def _pack_grid(values: np.ndarray) -> np.ndarray:
    """Pack 16 cell values (0..3) into a uint32, 2 bits per cell."""
    shifts = 2 * np.arange(16, dtype=np.uint32)
    return (values.astype(np.uint32) << shifts).sum(axis=-1, dtype=np.uint32)


def _mask_to_bits2(masks: np.ndarray) -> np.ndarray:
    """Expand cell-subset masks (bit per cell) to 2-bits-per-cell masks."""
    out = np.zeros(masks.shape, dtype=np.uint32)
    for c in range(16):
        has = (masks >> c) & 1
        out |= (has * np.uint32(3)) << np.uint32(2 * c)
    return out


def minimal_unique_puzzles() -> tuple[np.ndarray, list[tuple[int, int]]]:
    """All minimal uniquely-solvable clue subsets over all completed grids.

    Returns the grid table and a list of (grid_index, cell_mask) pairs in
    deterministic (grid, mask) order.  A subset is unique when exactly one
    completed grid agrees with it, and minimal when dropping any single
    clue breaks uniqueness.
    """
    grids = _enumerate_grids()
    packed = _pack_grid(grids)
    all_masks = np.arange(1 << 16, dtype=np.uint32)
    masks2 = _mask_to_bits2(all_masks)
    puzzles: list[tuple[int, int]] = []
    for gi in range(grids.shape[0]):
        xors = packed ^ packed[gi]  # (n_grids,)
        # number of grids agreeing with grid gi on each clue subset
        agree = (masks2[:, None] & xors[None, :]) == 0
        counts = agree.sum(axis=1)
        uniq = counts == 1
        # minimal: unique, and removing any one clue loses uniqueness
        not_minimal = np.zeros(uniq.shape, dtype=bool)
        for c in range(16):
            bit = np.uint32(1 << c)
            has = (all_masks & bit) != 0
            sub = (all_masks & ~bit).astype(np.int64)
            not_minimal |= has & uniq[sub]
        minimal = uniq & ~not_minimal
        for m in np.nonzero(minimal)[0]:
            puzzles.append((gi, int(m)))
    return grids, puzzles


def gen_sudoku4() -> Dataset:
    """Every minimal uniquely-solvable 4x4 puzzle as an input/output example.

    Inputs are the four one-hot variables of each clue cell; outputs are
    the variables of the remaining cells, valued from the unique solution.
    """
    grids, puzzles = minimal_unique_puzzles()
    task = TaskSpec("sudoku4")
    examples = []
    for gi, mask in puzzles:
        grid = grids[gi]
        inp = []
        out = []
        for cell in range(16):
            target = inp if (mask >> cell) & 1 else out
            for value in range(4):
                target.append((sudoku4_var(cell, value), int(grid[cell] == value)))
        examples.append(Example(tuple(inp), tuple(out)))
    return Dataset(64, tuple(examples), task)


# ---------------------------------------------------------------------------
# Ground truth CNF encoders


def _xor2_clauses(x: int, y: int, z: int) -> list[Clause]:
    """z <-> x xor y."""
    return [
        clause(-x, -y, -z),
        clause(x, y, -z),
        clause(x, -y, z),
        clause(-x, y, z),
    ]


def _xor3_clauses(a: int, b: int, c: int, z: int) -> list[Clause]:
    """z <-> a xor b xor c."""
    out = []
    for va in (0, 1):
        for vb in (0, 1):
            for vc in (0, 1):
                parity = va ^ vb ^ vc
                lits = [
                    a if va == 0 else -a,
                    b if vb == 0 else -b,
                    c if vc == 0 else -c,
                    z if parity == 1 else -z,
                ]
                out.append(clause(*lits))
    return out


def _exactly_one(variables: list[int]) -> list[Clause]:
    out = [clause(*variables)]
    for i in range(len(variables)):
        for j in range(i + 1, len(variables)):
            out.append(clause(-variables[i], -variables[j]))
    return out


def ground_truth_cnf(task: TaskSpec) -> CnfFormula:
    """Hand-written rules of the task as CNF over its defined variables."""
    if task.kind == "parity":
        L = task.length
        clauses = _xor2_clauses(1, 2, L + 1)
        for i in range(2, L):
            clauses += _xor2_clauses(L + i - 1, i + 1, L + i)
        return CnfFormula(task.num_defined, tuple(clauses))

    if task.kind == "addition":
        L = task.length
        x = lambda i: i + 1
        y = lambda i: L + i + 1
        s = lambda i: 2 * L + i + 1
        c = lambda i: 3 * L + i + 1
        clauses = _xor2_clauses(x(0), y(0), s(0))
        clauses += [clause(-c(0), x(0)), clause(-c(0), y(0)), clause(c(0), -x(0), -y(0))]
        for i in range(1, L):
            clauses += _xor3_clauses(x(i), y(i), c(i - 1), s(i))
            # carry out is the majority of the three addend bits
            clauses += [
                clause(-c(i), x(i), y(i)),
                clause(-c(i), x(i), c(i - 1)),
                clause(-c(i), y(i), c(i - 1)),
                clause(c(i), -x(i), -y(i)),
                clause(c(i), -x(i), -c(i - 1)),
                clause(c(i), -y(i), -c(i - 1)),
            ]
        return CnfFormula(task.num_defined, tuple(clauses))

    if task.kind == "count":
        L, k = task.length, task.modulus
        st = lambda t, v: L + t * k + v + 1  # t is 0-based prefix index
        clauses = [clause(-1, st(0, 1 % k)), clause(1, st(0, 0))]
        for t in range(L):
            clauses += _exactly_one([st(t, v) for v in range(k)])
        for t in range(L - 1):
            b = t + 2  # input bit consumed by step t+1
            for v in range(k):
                clauses.append(clause(-st(t, v), b, st(t + 1, v)))
                clauses.append(clause(-st(t, v), -b, st(t + 1, (v + 1) % k)))
        return CnfFormula(task.num_defined, tuple(clauses))

    # sudoku4: exactly-one per cell, and per row/column/block for each value
    clauses = []
    for cell in range(16):
        clauses += _exactly_one([sudoku4_var(cell, v) for v in range(4)])
    for v in range(4):
        for r in range(4):
            clauses += _exactly_one([sudoku4_var(r * 4 + c, v) for c in range(4)])
        for c in range(4):
            clauses += _exactly_one([sudoku4_var(r * 4 + c, v) for r in range(4)])
        for br in (0, 2):
            for bc in (0, 2):
                cells = [(br + dr) * 4 + (bc + dc) for dr in (0, 1) for dc in (0, 1)]
                clauses += _exactly_one([sudoku4_var(cell, v) for cell in cells])
    return CnfFormula(64, tuple(clauses))


def split_dataset(d: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Deterministic shuffled split; train size floors."""
    if not 0.0 < train_fraction < 1.0:
        raise ContractViolation("train_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(d.examples))
    n_train = int(len(d.examples) * train_fraction)
    train = tuple(d.examples[i] for i in order[:n_train])
    test = tuple(d.examples[i] for i in order[n_train:])
    return (
        replace(d, examples=train, split="train"),
        replace(d, examples=test, split="test"),
    )


def enumerate_inputs(task: TaskSpec) -> Iterator[tuple[tuple[int, int], ...]]:
    """All valid partial inputs of a task.

    For stream tasks this is every total assignment of the input bits; for
    sudoku4 it is every minimal uniquely-solvable puzzle.
    """
    if task.kind in ("parity", "count"):
        n_in = task.length
    elif task.kind == "addition":
        n_in = 2 * task.length
    else:
        for ex in gen_sudoku4().examples:
            yield ex.input_vars
        return
    for pattern in range(1 << n_in):
        yield tuple((v + 1, (pattern >> v) & 1) for v in range(n_in))


# ---------------------------------------------------------------------------
# Dataset file I/O: one JSON record per line, task descriptor header first.


def save_dataset(d: Dataset, path) -> None:
    with open(path, "w") as fh:
        header = {"task": json.loads(d.task.to_json()), "n_d": d.n_d, "split": d.split}
        fh.write(json.dumps(header) + "\n")
        for ex in d.examples:
            rec = {"input": [list(p) for p in ex.input_vars],
                   "output": [list(p) for p in ex.output_vars]}
            fh.write(json.dumps(rec) + "\n")


def load_dataset(path) -> Dataset:
    with open(path) as fh:
        header = json.loads(fh.readline())
        task = TaskSpec(header["task"]["kind"], header["task"].get("length", 0),
                        header["task"].get("modulus", 0))
        examples = []
        for line in fh:
            rec = json.loads(line)
            examples.append(Example(
                tuple((int(v), int(b)) for v, b in rec["input"]),
                tuple((int(v), int(b)) for v, b in rec["output"]),
            ))
    return Dataset(header["n_d"], tuple(examples), task, header.get("split", "all"))
