"""Command-line front end.

Subcommands: ``generate`` (synthetic dataset in svmlight format plus a JSON
sidecar), ``run`` (one descent, trace CSV plus JSON summary), ``sweep``
(cross-product of rules / oracles / epsilons / seeds / inits, in parallel),
``hardcase`` (adversarial quadratic verification) and ``ratio-sim``
(active-set equilibrium simulator).

Every output is a deterministic function of the flags and seeds; per-step
wall times are only collected under ``--time`` since they are the one
nondeterministic quantity.  A JSON file passed with ``--config`` supplies
defaults for any long flag (dashes become underscores); explicit flags win.
The output directory defaults to the ``ASCD_OUT`` environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import hardcase as hc_mod
from .data import SynthConfig, generate_synthetic, load_svmlight, \
    save_svmlight, take_columns
from .driver import RULES, RunConfig, UpdateRule, run, write_trace_csv
from .oracles import ORACLE_KINDS, OracleSpec
from .problem import CompositeProblem, Regularizer
from .ratiosim import RatioSimConfig, rho_infinity, simulate_rho

SCHEMA_VERSION = 1

# JSON summary schemas (field names are part of the CLI contract)
_COMMON = {"schema_version": {"type": "integer"},
           "kind": {"type": "string"}}

RUN_SUMMARY_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "kind", "data", "n_rows", "n_cols",
                 "rule", "update", "oracle", "l1", "l2", "steps", "epochs",
                 "seed", "init", "pick", "final_f", "mean_active_size",
                 "violations", "trace_csv"],
    "properties": {
        **_COMMON,
        "data": {"type": "string"},
        "n_rows": {"type": "integer"},
        "n_cols": {"type": "integer"},
        "rule": {"enum": list(RULES)},
        "update": {"type": "object"},
        "oracle": {"type": ["object", "null"]},
        "l1": {"type": "number"},
        "l2": {"type": "number"},
        "steps": {"type": "integer"},
        "epochs": {"type": "number"},
        "seed": {"type": "integer"},
        "init": {"enum": ["none", "true-gradient"]},
        "pick": {"enum": ["argmax-lower", "uniform-set"]},
        "final_f": {"type": "number"},
        "mean_active_size": {"type": "number"},
        "violations": {"type": "object"},
        "trace_csv": {"type": "string"},
        "wall_time_s": {"type": "number"},
    },
}

HARDCASE_SUMMARY_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "kind", "n", "alpha", "c_alpha", "steps",
                 "start", "cycling_checked", "cycling_ok", "omega_max",
                 "trace_csv"],
    "properties": {
        **_COMMON,
        "n": {"type": "integer"},
        "alpha": {"type": "number"},
        "c_alpha": {"type": "number"},
        "steps": {"type": "integer"},
        "start": {"enum": ["worst", "ones"]},
        "cycling_checked": {"type": "boolean"},
        "cycling_ok": {"type": ["boolean", "null"]},
        "first_failure": {"type": ["integer", "null"]},
        "omega_max": {"type": "number"},
        "trace_csv": {"type": "string"},
    },
}

RATIO_SUMMARY_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "kind", "n", "s", "c", "t_inf", "steps",
                 "seed", "reentry", "designated", "rho_closed_form",
                 "rho_simple_bound", "rho_empirical_mean", "exits",
                 "entries", "trace_csv"],
    "properties": {
        **_COMMON,
        "n": {"type": "integer"},
        "s": {"type": "integer"},
        "c": {"type": "number"},
        "t_inf": {"type": "number"},
        "steps": {"type": "integer"},
        "seed": {"type": "integer"},
        "reentry": {"enum": ["geometric", "fixed"]},
        "designated": {"type": "integer"},
        "rho_closed_form": {"type": "number"},
        "rho_simple_bound": {"type": "number"},
        "rho_empirical_mean": {"type": "number"},
        "exits": {"type": "integer"},
        "entries": {"type": "integer"},
        "trace_csv": {"type": "string"},
    },
}

GENERATE_SUMMARY_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "kind", "n_rows", "n_cols", "seed",
                 "column_scale_factor", "sparsity_factor", "support_frac",
                 "noise_sigma", "keep_probability", "nnz", "density",
                 "svmlight"],
    "properties": {**_COMMON},
}

SWEEP_SUMMARY_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "kind", "cells", "failed", "summary_csv"],
    "properties": {
        **_COMMON,
        "cells": {"type": "integer"},
        "failed": {"type": "array"},
        "summary_csv": {"type": "string"},
    },
}


def _write_json(payload: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(args) -> str:
    out = args.out or os.environ.get("ASCD_OUT") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _parse_steps(text: str, n: int) -> int:
    """Either a plain count or a multiple of the dimension, e.g. ``10n``."""
    text = text.strip().lower()
    if text.endswith("n"):
        return max(1, int(round(float(text[:-1] or "1") * n)))
    return int(text)


def _apply_config_defaults(parser: argparse.ArgumentParser, argv) -> list:
    """Pre-scan for --config and install its contents as parser defaults.

    Defaults go onto every subcommand parser: argparse re-applies subparser
    defaults into a fresh namespace, so setting them on the top parser
    alone would be overwritten.
    """
    argv = list(argv)
    for k, tok in enumerate(argv):
        if tok == "--config" and k + 1 < len(argv):
            path = argv[k + 1]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
        else:
            continue
        with open(path) as fh:
            loaded = json.load(fh)
        parser.set_defaults(**loaded)
        for sub in parser.sub_parsers:
            sub.set_defaults(**loaded)
    return argv


# ---------------------------------------------------------------------------
# run / sweep
# ---------------------------------------------------------------------------


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", default=None, help="svmlight input file")
    p.add_argument("--binarize", action="store_true",
                   help="set all stored values to 1 on load")
    p.add_argument("--take-cols", type=int, default=None,
                   help="keep only this many randomly chosen columns")
    p.add_argument("--take-seed", type=int, default=0)
    p.add_argument("--l2", type=float, default=0.0, help="ridge weight")
    p.add_argument("--l1", type=float, default=0.0, help="lasso weight")
    p.add_argument("--rule", default="ascd", choices=RULES)
    p.add_argument("--oracle", default="g3", choices=ORACLE_KINDS)
    p.add_argument("--epsilon", type=float, default=0.0,
                   help="g2 relative error level")
    p.add_argument("--hessian-bound", type=float, default=0.0,
                   help="bh curvature bound")
    p.add_argument("--oracle-seed", type=int, default=None,
                   help="defaults to --seed")
    p.add_argument("--update", default="fixed",
                   choices=["fixed", "line-search", "prox"])
    p.add_argument("--step-scale", type=float, default=1.0)
    p.add_argument("--per-coordinate", action="store_true",
                   help="use per-coordinate constants in the fixed/prox step")
    p.add_argument("--steps", default=None,
                   help="step budget; accepts multiples of n like '10n'")
    p.add_argument("--init", default="none",
                   choices=["none", "true-gradient"])
    p.add_argument("--pick", default="argmax-lower",
                   choices=["argmax-lower", "uniform-set"],
                   help="how the active coordinate is drawn from the set")
    p.add_argument("--diag-every", type=int, default=None,
                   help="true-gradient diagnostics cadence (default n)")
    p.add_argument("--rho-support", type=int, default=None)
    p.add_argument("--time", action="store_true",
                   help="collect wall times (nondeterministic fields)")
    p.add_argument("--tag", default="run", help="output file basename")


def _run_flag_dict(args) -> dict:
    keys = ("data", "binarize", "take_cols", "take_seed", "l2", "l1", "rule",
            "oracle", "epsilon", "hessian_bound", "oracle_seed", "update",
            "step_scale", "per_coordinate", "steps", "init", "pick",
            "diag_every", "rho_support", "time", "tag", "seed")
    return {k: getattr(args, k) for k in keys}


def _build_problem(flags: dict) -> CompositeProblem:
    matrix, target = load_svmlight(flags["data"], binarize=flags["binarize"])
    if flags["take_cols"] is not None:
        matrix = take_columns(matrix, flags["take_cols"], flags["take_seed"])
    if flags["l1"] and flags["l2"]:
        raise ValueError("choose one of --l1/--l2")
    if flags["l1"]:
        reg = Regularizer("l1", flags["l1"])
    elif flags["l2"]:
        reg = Regularizer("l2", flags["l2"])
    else:
        reg = Regularizer()
    return CompositeProblem(matrix, target, reg)


def _execute_run(flags: dict, out_dir: str) -> dict:
    problem = _build_problem(flags)
    steps = _parse_steps(str(flags["steps"]), problem.n)
    oracle_seed = flags["oracle_seed"]
    spec = OracleSpec(flags["oracle"], epsilon=flags["epsilon"],
                      hessian_bound=flags["hessian_bound"],
                      seed=flags["seed"] if oracle_seed is None else oracle_seed)
    config = RunConfig(
        problem=problem,
        steps=steps,
        rule=flags["rule"],
        update=UpdateRule(flags["update"].replace("-", "_"),
                          step_scale=flags["step_scale"],
                          per_coordinate=flags["per_coordinate"]),
        oracle=spec,
        seed=flags["seed"],
        init=flags["init"],
        pick=flags["pick"],
        diag_every=flags["diag_every"],
        rho_support=flags["rho_support"],
        time_steps=flags["time"],
    )
    result = run(config)
    trace_path = os.path.join(out_dir, flags["tag"] + ".csv")
    write_trace_csv(result, trace_path)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "kind": "run",
        "data": str(flags["data"]),
        "n_rows": problem.d,
        "n_cols": problem.n,
        "rule": flags["rule"],
        "update": {"kind": config.update.kind,
                   "step_scale": config.update.step_scale,
                   "per_coordinate": config.update.per_coordinate},
        "oracle": {"kind": spec.kind, "epsilon": spec.epsilon,
                   "hessian_bound": spec.hessian_bound, "seed": spec.seed},
        "l1": flags["l1"],
        "l2": flags["l2"],
        "steps": steps,
        "epochs": steps / problem.n,
        "seed": flags["seed"],
        "init": flags["init"],
        "pick": flags["pick"],
        "final_f": result.final_f,
        "mean_active_size": result.mean_active_size,
        "violations": {"soundness": result.soundness_violations,
                       "containment": result.containment_violations,
                       "sandwich": result.sandwich_violations},
        "trace_csv": os.path.basename(trace_path),
    }
    if flags["time"]:
        summary["wall_time_s"] = result.wall_time_s
    _write_json(summary, os.path.join(out_dir, flags["tag"] + ".json"))
    return summary


def cmd_run(args) -> int:
    out_dir = _out_dir(args)
    try:
        _execute_run(_run_flag_dict(args), out_dir)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def _sweep_worker(payload) -> tuple[str, dict | None, str | None]:
    tag, flags, out_dir = payload
    try:
        return tag, _execute_run(flags, out_dir), None
    except Exception as exc:  # reported per cell, sweep keeps going
        return tag, None, f"{type(exc).__name__}: {exc}"


def _split(text: str) -> list[str]:
    return [tok for tok in text.split(",") if tok != ""]


def cmd_sweep(args) -> int:
    out_dir = _out_dir(args)
    base = _run_flag_dict(args)
    rules = _split(args.rules) or [base["rule"]]
    oracles = _split(args.oracles) or [base["oracle"]]
    epsilons = [float(e) for e in _split(args.epsilons)] or [base["epsilon"]]
    seeds = [int(s) for s in _split(args.seeds)] or [base["seed"]]
    inits = _split(args.inits) or [base["init"]]

    cells = []
    for rule in rules:
        for oracle in oracles:
            for eps in epsilons:
                for seed in seeds:
                    for init in inits:
                        flags = dict(base, rule=rule, oracle=oracle,
                                     epsilon=eps, seed=seed, init=init)
                        tag = f"{base['tag']}_{rule}_{oracle}_eps{eps:g}" \
                              f"_seed{seed}_{init}"
                        flags["tag"] = tag
                        cells.append((tag, flags, out_dir))
    if len(cells) > args.max_cells:
        print(f"error: {len(cells)} cells exceed --max-cells={args.max_cells}",
              file=sys.stderr)
        return 1

    if args.jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = list(pool.map(_sweep_worker, cells))
    else:
        outcomes = [_sweep_worker(c) for c in cells]

    summary_csv = os.path.join(out_dir, base["tag"] + "_summary.csv")
    failed = []
    with open(summary_csv, "w") as fh:
        fh.write("tag,rule,oracle,epsilon,seed,init,final_f,"
                 "mean_active_size,epochs\n")
        for (tag, flags, _), (_, summary, err) in zip(cells, outcomes):
            if err is not None:
                failed.append({"tag": tag, "error": err})
                continue
            fh.write(",".join([
                tag, flags["rule"], flags["oracle"], repr(flags["epsilon"]),
                str(flags["seed"]), flags["init"], repr(summary["final_f"]),
                repr(summary["mean_active_size"]), repr(summary["epochs"]),
            ]) + "\n")
    _write_json({
        "schema_version": SCHEMA_VERSION,
        "kind": "sweep",
        "cells": len(cells),
        "failed": failed,
        "summary_csv": os.path.basename(summary_csv),
    }, os.path.join(out_dir, base["tag"] + "_sweep.json"))
    if failed:
        for item in failed:
            print(f"failed cell {item['tag']}: {item['error']}",
                  file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# generate / hardcase / ratio-sim
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    out_dir = _out_dir(args)
    config = SynthConfig(n_rows=args.rows, n_cols=args.cols, seed=args.seed,
                         column_scale_factor=args.scale_factor,
                         sparsity_factor=args.sparsity_factor,
                         support_frac=args.support_frac,
                         noise_sigma=args.noise_sigma)
    matrix, target = generate_synthetic(config)
    svm_path = os.path.join(out_dir, args.tag + ".svm")
    save_svmlight(matrix, target, svm_path)
    _write_json({
        "schema_version": SCHEMA_VERSION,
        "kind": "generate",
        "n_rows": config.n_rows,
        "n_cols": config.n_cols,
        "seed": config.seed,
        "column_scale_factor": config.column_scale_factor,
        "sparsity_factor": config.sparsity_factor,
        "support_frac": config.support_frac,
        "noise_sigma": config.noise_sigma,
        "keep_probability": config.keep_probability,
        "nnz": matrix.nnz,
        "density": matrix.nnz / (matrix.n_rows * matrix.n_cols),
        "svmlight": os.path.basename(svm_path),
    }, os.path.join(out_dir, args.tag + ".json"))
    return 0


def cmd_hardcase(args) -> int:
    if not 0.0 < args.alpha < 0.5:
        print("error: --alpha must lie strictly between 0 and 0.5",
              file=sys.stderr)
        return 2
    if args.n <= 2:
        print("error: --n must be greater than 2", file=sys.stderr)
        return 2
    out_dir = _out_dir(args)
    hc = hc_mod.HardCase.build(args.alpha, args.n)
    if args.start == "worst":
        report = hc_mod.verify_cycling(hc, args.steps)
        picks, omega, grad_inf = report.picks, report.omega, report.grad_inf
        cycling_ok, first_failure = report.ok, report.first_failure
    else:
        picks, omega, grad_inf, _, _ = hc_mod.scd_trace(
            hc, np.ones(args.n), args.steps)
        cycling_ok, first_failure = None, None

    trace_path = os.path.join(out_dir, args.tag + ".csv")
    with open(trace_path, "w") as fh:
        fh.write("t,i,omega,grad_inf\n")
        for t in range(args.steps):
            fh.write(f"{t},{int(picks[t])},{float(omega[t])!r},"
                     f"{float(grad_inf[t])!r}\n")
    _write_json({
        "schema_version": SCHEMA_VERSION,
        "kind": "hardcase",
        "n": args.n,
        "alpha": args.alpha,
        "c_alpha": hc.c_alpha,
        "steps": args.steps,
        "start": args.start,
        "cycling_checked": args.start == "worst",
        "cycling_ok": cycling_ok,
        "first_failure": first_failure,
        "omega_max": float(np.max(omega)),
        "trace_csv": os.path.basename(trace_path),
    }, os.path.join(out_dir, args.tag + ".json"))
    if args.start == "worst" and not cycling_ok:
        print(f"cycling verification failed at step {first_failure}",
              file=sys.stderr)
        return 1
    return 0


def cmd_ratio_sim(args) -> int:
    out_dir = _out_dir(args)
    try:
        config = RatioSimConfig(n=args.n, s=args.s, c=args.c,
                                t_inf=args.t_inf, steps=args.steps,
                                seed=args.seed, reentry=args.reentry)
        limit = rho_infinity(args.n, args.s, args.c, args.t_inf)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    trace = simulate_rho(config)
    trace_path = os.path.join(out_dir, args.tag + ".csv")
    with open(trace_path, "w") as fh:
        fh.write("t,rho,active_size\n")
        for t in range(config.steps):
            fh.write(f"{t},{float(trace.rho[t])!r},"
                     f"{int(trace.active_size[t])}\n")
    tail = trace.rho[3 * config.steps // 4:]
    _write_json({
        "schema_version": SCHEMA_VERSION,
        "kind": "ratio-sim",
        "n": config.n,
        "s": config.s,
        "c": config.c,
        "t_inf": config.t_inf,
        "steps": config.steps,
        "seed": config.seed,
        "reentry": config.reentry,
        "designated": trace.designated,
        "rho_closed_form": limit.value,
        "rho_simple_bound": limit.simple_bound,
        "rho_empirical_mean": float(tail.mean()),
        "exits": trace.exits,
        "entries": trace.entries,
        "trace_csv": os.path.basename(trace_path),
    }, os.path.join(out_dir, args.tag + ".json"))
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ascd",
        description="Coordinate descent with uniform, steepest and "
                    "approximate-steepest selection.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None,
                       help="JSON file with flag defaults")
        p.add_argument("--out", default=None,
                       help="output directory (default $ASCD_OUT or .)")
        p.add_argument("--seed", type=int, default=0)

    g = sub.add_parser("generate", help="write a synthetic dataset")
    common(g)
    g.add_argument("--rows", type=int, default=None)
    g.add_argument("--cols", type=int, default=None)
    g.add_argument("--scale-factor", type=float, default=10.0)
    g.add_argument("--sparsity-factor", type=float, default=10.0)
    g.add_argument("--support-frac", type=float, default=0.1)
    g.add_argument("--noise-sigma", type=float, default=0.1)
    g.add_argument("--tag", default="synthetic")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="one descent run")
    common(r)
    _add_run_flags(r)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="cross-product of runs")
    common(s)
    _add_run_flags(s)
    s.add_argument("--rules", default="", help="comma list of rules")
    s.add_argument("--oracles", default="", help="comma list of oracle kinds")
    s.add_argument("--epsilons", default="", help="comma list of g2 errors")
    s.add_argument("--seeds", default="", help="comma list of run seeds")
    s.add_argument("--inits", default="", help="comma list of init modes")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--max-cells", type=int, default=256)
    s.set_defaults(func=cmd_sweep)

    h = sub.add_parser("hardcase", help="adversarial quadratic verification")
    common(h)
    h.add_argument("--n", type=int, default=None)
    h.add_argument("--alpha", type=float, default=0.01)
    h.add_argument("--steps", type=int, default=None)
    h.add_argument("--start", default="worst", choices=["worst", "ones"])
    h.add_argument("--tag", default="hardcase")
    h.set_defaults(func=cmd_hardcase)

    q = sub.add_parser("ratio-sim", help="active-set equilibrium simulator")
    common(q)
    q.add_argument("--n", type=int, default=None)
    q.add_argument("--s", type=int, default=None)
    q.add_argument("--c", type=float, default=1.0)
    q.add_argument("--t-inf", type=float, default=None)
    q.add_argument("--steps", type=int, default=None)
    q.add_argument("--reentry", default="geometric",
                   choices=["geometric", "fixed"])
    q.add_argument("--tag", default="ratio")
    q.set_defaults(func=cmd_ratio_sim)

    parser.sub_parsers = [g, r, s, h, q]
    return parser


_REQUIRED = {
    "generate": ("rows", "cols"),
    "run": ("data", "steps"),
    "sweep": ("data", "steps"),
    "hardcase": ("n", "steps"),
    "ratio-sim": ("n", "s", "t_inf", "steps"),
}


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    argv = _apply_config_defaults(parser, argv)
    args = parser.parse_args(argv)
    for dest in _REQUIRED[args.command]:
        if getattr(args, dest) is None:
            parser.error(f"--{dest.replace('_', '-')} is required "
                         "(flag or --config entry)")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
