"""Dataset generators, ground-truth encoders, and splits."""

import itertools

import numpy as np
import pytest

from maxeq.formula import Assignment, ContractViolation, evaluate_cnf
from maxeq.tasks import (
    Dataset,
    Example,
    TaskSpec,
    gen_stream,
    ground_truth_cnf,
    load_dataset,
    save_dataset,
    split_dataset,
    sudoku4_var,
)


def example_assignment(ex, n_d):
    return ex.full_assignment(n_d)


class TestStreamExamples:
    def test_parity_prefixes(self):
        # bits 1,0,1 -> prefix parities 1,0
        task = TaskSpec("parity", 3)
        outs = {}
        b = [1, 0, 1]
        acc = 0
        for i, bit in enumerate(b):
            acc ^= bit
            if i >= 1:
                outs[i] = acc
        assert outs == {1: 1, 2: 0}

    def test_parity_dataset_matches_rule(self):
        task = TaskSpec("parity", 5)
        ds = gen_stream(task, 50, seed=1)
        for ex in ds.examples:
            ins = dict(ex.input_vars)
            outs = dict(ex.output_vars)
            acc = 0
            for i in range(1, 6):
                acc ^= ins[i]
                if i >= 2:
                    assert outs[5 + i - 1] == acc

    def test_addition_example(self):
        # operands x=(1,1), y=(1,0) LSB-first: 3 + 1 = 4 -> sum 00, carry 1
        task = TaskSpec("addition", 2)
        ds = gen_stream(task, 200, seed=2)
        found = False
        for ex in ds.examples:
            ins = dict(ex.input_vars)
            if (ins[1], ins[2], ins[3], ins[4]) == (1, 1, 1, 0):
                outs = dict(ex.output_vars)
                assert (outs[5], outs[6]) == (0, 0)      # sum bits
                assert outs[8] == 1                      # final carry
                found = True
        assert found

    def test_count_one_hot(self):
        # 1,1,0,1 -> 3 ones, 3 mod 2 = 1
        task = TaskSpec("count", 4, 2)
        ds = gen_stream(task, 100, seed=3)
        for ex in ds.examples:
            ins = dict(ex.input_vars)
            outs = dict(ex.output_vars)
            ones = sum(ins.values())
            final = [outs[4 + 3 * 2 + v + 1] for v in range(2)]
            assert final[ones % 2] == 1 and sum(final) == 1
            if (ins[1], ins[2], ins[3], ins[4]) == (1, 1, 0, 1):
                assert final == [0, 1]

    def test_examples_satisfy_ground_truth(self):
        for task in (TaskSpec("parity", 4), TaskSpec("addition", 3),
                     TaskSpec("count", 4, 3)):
            gt = ground_truth_cnf(task)
            ds = gen_stream(task, 40, seed=7)
            for ex in ds.examples:
                assert evaluate_cnf(gt, example_assignment(ex, task.num_defined))


class TestGroundTruthCnf:
    @pytest.mark.parametrize("L", [2, 3, 4, 5, 6])
    def test_parity_model_count(self, L):
        task = TaskSpec("parity", L)
        gt = ground_truth_cnf(task)
        n = task.num_defined
        count = sum(
            evaluate_cnf(gt, Assignment.from_values(list(bits), n))
            for bits in itertools.product([0, 1], repeat=n)
        )
        assert count == 2 ** L

    def test_addition_model_count(self):
        task = TaskSpec("addition", 2)
        gt = ground_truth_cnf(task)
        n = task.num_defined
        count = sum(
            evaluate_cnf(gt, Assignment.from_values(list(bits), n))
            for bits in itertools.product([0, 1], repeat=n)
        )
        assert count == 2 ** 4  # inputs free, outputs determined

    def test_count_model_count(self):
        task = TaskSpec("count", 3, 2)
        gt = ground_truth_cnf(task)
        n = task.num_defined
        count = sum(
            evaluate_cnf(gt, Assignment.from_values(list(bits), n))
            for bits in itertools.product([0, 1], repeat=n)
        )
        assert count == 2 ** 3

    def test_sudoku_cnf_shape(self):
        gt = ground_truth_cnf(TaskSpec("sudoku4"))
        assert gt.num_vars == 64
        # cell + 3 group families, exactly-one each: 4 * 16 * (1 + 6)
        assert len(gt.clauses) == 448


class TestSplit:
    def test_sizes(self):
        ds = gen_stream(TaskSpec("parity", 3), 10000, seed=1)
        tr, te = split_dataset(ds, 0.9, seed=4)
        assert len(tr) == 9000 and len(te) == 1000

    def test_floor_rounding(self):
        ds = gen_stream(TaskSpec("parity", 3), 10, seed=1)
        tr, te = split_dataset(ds, 0.85, seed=4)
        assert len(tr) == 8 and len(te) == 2

    def test_deterministic_and_disjoint(self):
        ds = gen_stream(TaskSpec("parity", 4), 200, seed=1)
        tr1, te1 = split_dataset(ds, 0.8, seed=9)
        tr2, te2 = split_dataset(ds, 0.8, seed=9)
        assert tr1.examples == tr2.examples and te1.examples == te2.examples
        ids = {id(e) for e in tr1.examples} & {id(e) for e in te1.examples}
        assert not ids

    def test_fraction_validation(self):
        ds = gen_stream(TaskSpec("parity", 3), 10, seed=1)
        with pytest.raises(ContractViolation):
            split_dataset(ds, 1.0, seed=0)


class TestDatasetIo:
    def test_round_trip(self, tmp_path):
        ds = gen_stream(TaskSpec("count", 4, 2), 25, seed=5)
        path = tmp_path / "dataset.txt"
        save_dataset(ds, path)
        back = load_dataset(path)
        assert back.n_d == ds.n_d
        assert back.task == ds.task
        assert back.examples == ds.examples

    def test_example_overlap_rejected(self):
        with pytest.raises(ContractViolation):
            Example(((1, 0),), ((1, 1),))


class TestSudokuVarLayout:
    def test_one_hot_indexing(self):
        assert sudoku4_var(0, 0) == 1
        assert sudoku4_var(0, 3) == 4
        assert sudoku4_var(15, 3) == 64
