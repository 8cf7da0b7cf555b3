"""Command-line entry point.

Pipelines chain generate -> train -> decode -> solve -> verify -> repair
stages with every artifact persisted and re-loadable; each stage is also
a standalone subcommand.  Configuration is INI-style key/value sections;
every modelling default is overridable there.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
import time

import numpy as np

from maxeq import decode as dec
from maxeq import knowledge, sdp_layer, tasks, verify
from maxeq.formula import dimacs_cnf_parse, wdimacs_emit, wdimacs_parse
from maxeq.maxsat_solver import Assumptions, Solver, Status
from maxeq.tasks import TaskSpec

ARTIFACTS = {
    "dataset": "dataset.txt",
    "c": "c.matrix",
    "s": "s.matrix",
    "wcnf": "rules.wcnf",
    "meta": "meta.txt",
    "metrics": "metrics.log",
    "report": "verify.report",
}


class StageError(RuntimeError):
    pass


def _need(path: str, stage: str) -> str:
    if not os.path.exists(path):
        raise StageError(f"stage {stage}: missing artifact {path}")
    return path


def _read_config(path: str) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser()
    with open(path) as fh:
        cfg.read_file(fh)
    return cfg


def _task_from_config(cfg) -> TaskSpec:
    t = cfg["task"]
    return TaskSpec(t.get("kind"), t.getint("length", fallback=0),
                    t.getint("modulus", fallback=0))


def _layer_config(cfg, task: TaskSpec) -> sdp_layer.LayerConfig:
    sec = cfg["layer"] if cfg.has_section("layer") else {}
    get = sec.get if hasattr(sec, "get") else (lambda k, d=None: d)
    n_a = int(get("n_a", task.default_aux()))
    return sdp_layer.LayerConfig(
        n_d=task.num_defined,
        n_a=n_a,
        k=int(get("k", 0)),
        max_sweeps=int(get("max_sweeps", 40)),
        convergence_tol=float(get("convergence_tol", 1e-4)),
        degenerate_tol=float(get("degenerate_tol", 1e-8)),
        rounding_threshold=float(get("rounding_threshold", 0.5)),
    )


def _train_config(cfg, seed: int) -> sdp_layer.TrainConfig:
    sec = cfg["train"] if cfg.has_section("train") else {}
    get = sec.get if hasattr(sec, "get") else (lambda k, d=None: d)
    return sdp_layer.TrainConfig(
        epochs=int(get("epochs", 100)),
        learning_rate=float(get("learning_rate", 2e-3)),
        batch_size=int(get("batch_size", 40)),
        adam_beta1=float(get("adam_beta1", 0.9)),
        adam_beta2=float(get("adam_beta2", 0.999)),
        adam_eps=float(get("adam_eps", 1e-8)),
        iht_enabled=str(get("iht", "false")).lower() in ("1", "true", "yes"),
        iht_fraction=float(get("iht_fraction", 0.2)),
        backward_cap=int(get("backward_cap", 40)),
        seed=int(get("seed", seed)),
    )


def _load_splits(cfg, out: str, stage: str):
    ds = tasks.load_dataset(_need(os.path.join(out, ARTIFACTS["dataset"]), stage))
    fraction = cfg["task"].getfloat("split_fraction", fallback=0.9)
    seed = cfg["pipeline"].getint("seed", fallback=0)
    return tasks.split_dataset(ds, fraction, seed)


def stage_gen(cfg, out: str) -> None:
    task = _task_from_config(cfg)
    if task.kind == "sudoku4":
        ds = tasks.gen_sudoku4()
    else:
        n = cfg["task"].getint("samples")
        seed = cfg["pipeline"].getint("seed", fallback=0)
        ds = tasks.gen_stream(task, n, seed)
    tasks.save_dataset(ds, os.path.join(out, ARTIFACTS["dataset"]))
    print(f"gen: {len(ds)} examples over {ds.n_d} variables")


def stage_train(cfg, out: str) -> None:
    task = _task_from_config(cfg)
    train_ds, _ = _load_splits(cfg, out, "train")
    layer_cfg = _layer_config(cfg, task)
    seed = cfg["pipeline"].getint("seed", fallback=0)
    train_cfg = _train_config(cfg, seed)
    t0 = time.time()
    result = sdp_layer.train(train_ds, layer_cfg, train_cfg,
                             log=lambda m: print(
                                 f"  epoch {m.epoch} loss {m.loss:.5f} "
                                 f"bit {m.bit_acc:.4f} inst {m.instance_acc:.4f}",
                                 flush=True))
    sdp_layer.save_cmatrix(result.c, os.path.join(out, ARTIFACTS["c"]))
    sdp_layer.save_metrics(result.metrics, os.path.join(out, ARTIFACTS["metrics"]))
    print(f"train: {len(train_ds)} examples, {train_cfg.epochs} epochs "
          f"in {time.time() - t0:.1f}s")


def stage_inject_gt(cfg, out: str) -> None:
    task = _task_from_config(cfg)
    gt = tasks.ground_truth_cnf(task)
    base = cfg["decode"].getfloat("base_weight", fallback=1.0) if cfg.has_section("decode") else 1.0
    c, _ = dec.rules_to_c(gt, base)
    sdp_layer.save_cmatrix(c, os.path.join(out, ARTIFACTS["c"]))
    print(f"inject-gt: wrote weights for {task.kind} ({c.n_d}+{c.n_a} variables)")


def stage_decode(cfg, out: str) -> None:
    c = sdp_layer.load_cmatrix(_need(os.path.join(out, ARTIFACTS["c"]), "decode"))
    scale = cfg["decode"].getfloat("scale", fallback=1e6) if cfg.has_section("decode") else 1e6
    wcnf, meta = dec.maxeq_to_wcnf(dec.c_to_maxeq(c))
    with open(os.path.join(out, ARTIFACTS["wcnf"]), "wb") as fh:
        fh.write(wdimacs_emit(wcnf, scale))
    with open(os.path.join(out, ARTIFACTS["meta"]), "w") as fh:
        fh.write(dec.emit_meta(meta))
    print(f"decode: {len(wcnf.clauses)} clauses over {wcnf.num_vars} variables")


def _load_decoded(out: str, stage: str):
    wcnf = wdimacs_parse(open(_need(os.path.join(out, ARTIFACTS["wcnf"]), stage), "rb").read())
    meta = dec.parse_meta(open(_need(os.path.join(out, ARTIFACTS["meta"]), stage)).read())
    n_orig = len(meta.var_map)
    proj = frozenset(range(1, n_orig + 1))
    from maxeq.formula import WcnfFormula
    wcnf = WcnfFormula(wcnf.num_vars, wcnf.clauses, proj)
    return wcnf, meta


def stage_solve(cfg, out: str) -> None:
    task = _task_from_config(cfg)
    wcnf, meta = _load_decoded(out, "solve")
    _, test_ds = _load_splits(cfg, out, "solve")
    solver = Solver(wcnf)
    correct = 0
    for ex in test_ds.examples:
        res = solver.solve(dict(ex.input_vars))
        ok = res.status is Status.OPTIMAL and all(
            res.assignment[v] == b for v, b in ex.output_vars)
        correct += 1 if ok else 0
    acc = correct / max(1, len(test_ds))
    print(f"solve: exact inference accuracy {acc:.4f} on {len(test_ds)} test examples")


def stage_verify(cfg, out: str) -> int:
    task = _task_from_config(cfg)
    wcnf, meta = _load_decoded(out, "verify")
    gt = tasks.ground_truth_cnf(task)
    sec = cfg["verify"] if cfg.has_section("verify") else {}
    get = sec.get if hasattr(sec, "get") else (lambda k, d=None: d)
    mode = get("mode", "general")
    workers = int(get("workers", 1))
    domain_spec = get("domain", "")
    if domain_spec == "cell-uniqueness":
        wcnf = knowledge.conjoin_symbolic(wcnf, knowledge.cell_uniqueness_cnf())
    elif domain_spec:
        wcnf = knowledge.conjoin_symbolic(
            wcnf, dimacs_cnf_parse(open(domain_spec, "rb").read()))
    if mode == "unique":
        _, test_ds = _load_splits(cfg, out, "verify")
        pairs = [verify.IoPair(ex.input_vars,
                               (ex.input_vars + ex.output_vars,))
                 for ex in test_ds.examples]
        pairs = [verify.IoPair(p.input, (tuple(sorted(p.expected_outputs[0])),))
                 for p in pairs]
        report = verify.check_unique_fe(wcnf, meta, gt, pairs, workers=workers)
    elif mode == "general":
        limit = int(get("optima_limit", 64))
        report = verify.check_general_fe(wcnf, meta, gt, tasks.enumerate_inputs(task),
                                         workers=workers, optima_limit=limit)
    elif mode == "sufficient":
        report = verify.check_sufficient_condition(wcnf, meta, gt)
    else:
        raise StageError(f"stage verify: unknown mode {mode!r}")
    text = verify.emit_report(report)
    with open(os.path.join(out, ARTIFACTS["report"]), "w") as fh:
        fh.write(text)
    print(text, end="")
    return 1 if report.verdict is verify.Verdict.COUNTEREXAMPLE_FOUND else 0


def stage_repair(cfg, out: str) -> None:
    c = sdp_layer.load_cmatrix(_need(os.path.join(out, ARTIFACTS["c"]), "repair"))
    sec = cfg["verify"] if cfg.has_section("verify") else {}
    get = sec.get if hasattr(sec, "get") else (lambda k, d=None: d)
    domain_spec = get("domain", "cell-uniqueness")
    if domain_spec == "cell-uniqueness":
        domain = knowledge.cell_uniqueness_cnf()
    else:
        domain = dimacs_cnf_parse(open(domain_spec, "rb").read())
    repaired = knowledge.add_knowledge(c, domain)
    sdp_layer.save_cmatrix(repaired, os.path.join(out, ARTIFACTS["c"]))
    print(f"repair: weights grown to {repaired.n_d}+{repaired.n_a} variables")


def stage_round_s(cfg, out: str) -> None:
    task = _task_from_config(cfg)
    train_ds, test_ds = _load_splits(cfg, out, "round-s")
    layer_cfg = _layer_config(cfg, task)
    seed = cfg["pipeline"].getint("seed", fallback=0)
    s_path = os.path.join(out, ARTIFACTS["s"])
    if os.path.exists(s_path):
        s = sdp_layer.load_smatrix(s_path)
    else:
        train_cfg = _train_config(cfg, seed)
        m = cfg["layer"].getint("clause_rows", fallback=2 * layer_cfg.n1)
        result = sdp_layer.train_s(train_ds, layer_cfg, train_cfg, m)
        s = result.s
        sdp_layer.save_smatrix(s, s_path)
        print(f"round-s: trained clause matrix, final bit acc "
              f"{result.metrics[-1].bit_acc:.4f}")
    sample = cfg["verify"].getint("round_s_sample", fallback=50) \
        if cfg.has_section("verify") else 50
    examples = test_ds.examples[:sample]
    grid = np.unique(np.abs(s.entries))
    solved_by_eps = {}
    for eps in grid:
        ternary = dec.round_s(s, float(eps))
        wcnf = dec.ternary_s_to_wcnf(ternary)
        if not wcnf.clauses:
            solved_by_eps[float(eps)] = 0
            continue
        solver = Solver(wcnf)
        solved = 0
        for ex in examples:
            res = solver.solve(dict(ex.input_vars))
            if res.status is Status.OPTIMAL and all(
                    res.assignment[v] == b for v, b in ex.output_vars):
                solved += 1
        solved_by_eps[float(eps)] = solved
    best = max(solved_by_eps.values()) if solved_by_eps else 0
    print(f"round-s: best threshold solves {best}/{len(examples)} test instances "
          f"over {len(grid)} thresholds")


STAGES = {
    "gen": stage_gen,
    "train": stage_train,
    "inject-gt": stage_inject_gt,
    "decode": stage_decode,
    "solve": stage_solve,
    "verify": stage_verify,
    "repair": stage_repair,
    "round-s": stage_round_s,
}


def run_pipeline(config_path: str, out: str | None = None, seed: int | None = None,
                 workers: int | None = None) -> int:
    cfg = _read_config(config_path)
    if not cfg.has_section("pipeline"):
        cfg.add_section("pipeline")
    if seed is not None:
        cfg["pipeline"]["seed"] = str(seed)
    if workers is not None:
        if not cfg.has_section("verify"):
            cfg.add_section("verify")
        cfg["verify"]["workers"] = str(workers)
    out_dir = out or cfg["pipeline"].get("out", "run")
    os.makedirs(out_dir, exist_ok=True)
    stages = [s.strip() for s in cfg["pipeline"].get("stages", "").split(",") if s.strip()]
    code = 0
    for name in stages:
        if name not in STAGES:
            print(f"unknown stage {name!r}", file=sys.stderr)
            return 2
        try:
            rc = STAGES[name](cfg, out_dir)
            if rc:
                code = rc
        except StageError as e:
            print(str(e), file=sys.stderr)
            return 2
    return code


def _add_common(p):
    p.add_argument("--out", default="run", help="artifact directory")
    p.add_argument("--seed", type=int, default=0)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="maxeq", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pipeline", help="run configured stages in order")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("gen-data", help="generate a dataset")
    p.add_argument("--task", required=True, choices=["parity", "addition", "count", "sudoku4"])
    p.add_argument("--length", type=int, default=0)
    p.add_argument("--modulus", type=int, default=0)
    p.add_argument("--samples", type=int, default=10000)
    _add_common(p)

    p = sub.add_parser("solve", help="exact inference on a WDIMACS formula")
    p.add_argument("--wcnf", required=True)
    p.add_argument("--assume", default="", help="comma list var=0|1")
    p.add_argument("--minimize", action="store_true")
    p.add_argument("--enumerate", type=int, default=0, metavar="LIMIT")
    p.add_argument("--project", default="", help="comma list of variables")

    p = sub.add_parser("export-wcnf", help="decode a weight matrix to WDIMACS")
    p.add_argument("--c", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--scale", type=float, default=1e6)

    args = parser.parse_args(argv)

    if args.command == "pipeline":
        return run_pipeline(args.config, args.out, args.seed, args.workers)

    if args.command == "gen-data":
        task = TaskSpec(args.task, args.length, args.modulus)
        os.makedirs(args.out, exist_ok=True)
        if task.kind == "sudoku4":
            ds = tasks.gen_sudoku4()
        else:
            ds = tasks.gen_stream(task, args.samples, args.seed)
        tasks.save_dataset(ds, os.path.join(args.out, ARTIFACTS["dataset"]))
        print(f"wrote {len(ds)} examples")
        return 0

    if args.command == "solve":
        from maxeq.maxsat_solver import Objective
        wcnf = wdimacs_parse(open(args.wcnf, "rb").read())
        assume = {}
        if args.assume:
            for part in args.assume.split(","):
                v, b = part.split("=")
                assume[int(v)] = int(b)
        if args.enumerate:
            proj = ([int(x) for x in args.project.split(",")] if args.project
                    else sorted(wcnf.projection))
            eo = Solver(wcnf).enumerate_optima(assume, proj, args.enumerate)
            print(f"status {eo.status.value} weight {eo.weight!r} "
                  f"optima {len(eo.optima)} overflow {eo.overflow}")
            for opt in eo.optima:
                print(" ".join(f"{v}={b}" for v, b in opt))
        else:
            obj = Objective.MINIMIZE if args.minimize else Objective.MAXIMIZE
            res = Solver(wcnf).solve(assume, obj)
            if res.status is Status.HARD_UNSAT:
                print("status hard_unsat")
                return 1
            bits = " ".join(f"{v}={res.assignment[v]}"
                            for v in sorted(wcnf.projection))
            print(f"status optimal weight {res.weight!r}")
            print(bits)
        return 0

    if args.command == "export-wcnf":
        c = sdp_layer.load_cmatrix(args.c)
        wcnf, _ = dec.maxeq_to_wcnf(dec.c_to_maxeq(c))
        with open(args.output, "wb") as fh:
            fh.write(wdimacs_emit(wcnf, args.scale))
        print(f"wrote {len(wcnf.clauses)} clauses")
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
