"""Command-line entry points.

Every subcommand reads ``--config`` (a TOML file or ``default``), takes an
optional ``--seed`` and ``--out`` override, writes its tables into the output
directory and prints a one-line JSON result. Failures print a one-line JSON
error on stderr and exit nonzero.
"""

import argparse
import json
import os
import sys

import numpy as np

from .config import ConfigError, load_config
from .crosstalk import NOMINAL, ConditionVector
from .io import (
    CheckpointError,
    load_controller,
    load_grape,
    save_controller,
    save_grape,
    write_csv,
    write_summary,
)
from .trainers import TrainingDiverged, train_grape, train_pgnc

COMMANDS = (
    "train-pgnc",
    "train-grape",
    "eval",
    "scan-condition",
    "scan-detuning",
    "bench-per-condition",
    "gradcheck",
    "oracle-check",
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _emit_error("usage", message)
        sys.exit(2)


def _emit_error(kind, message, **extra):
    doc = {"error": kind, "message": message}
    doc.update({k: v for k, v in extra.items() if v is not None})
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)


def _emit(doc):
    print(json.dumps(doc, sort_keys=True, default=float))


def build_parser():
    p = _Parser(prog="pgnc", description="Condition-aware CZ pulse synthesis for two transmons.")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    helps = {
        "train-pgnc": "train the conditioned controller",
        "train-grape": "optimize a static GRAPE waveform at one condition",
        "eval": "fidelity distributions at the configured evaluation conditions",
        "scan-condition": "paired off-grid (c_I, c_Q) scan, PGNC vs static baselines",
        "scan-detuning": "average fidelity over two-qubit detuning offsets",
        "bench-per-condition": "PGNC vs GRAPE re-optimized per condition",
        "gradcheck": "reverse-mode gradient vs central finite differences",
        "oracle-check": "constant-coupling CZ oracle",
    }
    for name in COMMANDS:
        s = sub.add_parser(name, help=helps[name])
        s.add_argument("--config", default="default", help="TOML config path or 'default'")
        s.add_argument("--seed", type=int, default=None, help="override run.seed")
        s.add_argument("--out", default=None, help="override run.out (output directory)")
        if name in ("eval", "scan-condition", "scan-detuning", "bench-per-condition"):
            s.add_argument("--checkpoint", default=None, help="PGNC checkpoint")
        if name in ("eval", "scan-condition", "scan-detuning"):
            s.add_argument("--grape", action="append", default=[], help="GRAPE checkpoint (repeatable)")
        if name in ("eval", "scan-detuning"):
            s.add_argument("--oracle", action="store_true", help="include the constant-coupling CZ waveform")
        if name == "train-grape":
            s.add_argument("--condition", default="0,0,0", help="training condition c_I,c_Q,c_f")
    return p


def _parse_condition(text):
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"bad condition {text!r}; expected c_I,c_Q,c_f") from None
    if len(vals) != 3:
        raise UsageError(f"bad condition {text!r}; expected three comma-separated numbers")
    return ConditionVector(*vals)


def _history_rows(history):
    n_cond = len(history[0]["avg_fidelity"]) if history else 0
    header = ["epoch", "objective", "best_objective", "leakage", "smoothness", "grad_norm", "step_size"]
    header += [f"avg_fidelity_{k}" for k in range(n_cond)]
    rows = [
        [h["epoch"], h["objective"], h["best_objective"], h["leakage"], h["smoothness"], h["grad_norm"], h["step_size"], *h["avg_fidelity"]]
        for h in history
    ]
    return header, rows


def _controllers(args, cfg, allow_oracle=False):
    from .evaluation import PGNCController, StaticController, cz_oracle_waveform

    out = []
    if getattr(args, "checkpoint", None):
        params, _, _ = load_controller(args.checkpoint, cfg.problem.controller)
        out.append(PGNCController(params, cfg.problem))
    grapes = getattr(args, "grape", []) or []
    for path in grapes:
        gp, _ = load_grape(path)
        if gp.nodes.shape[1] < 2:
            raise CheckpointError(f"{path}: GRAPE checkpoint has too few nodes")
        name = "grape" if len(grapes) == 1 else "grape_" + os.path.splitext(os.path.basename(path))[0]
        out.append(StaticController(gp.waveforms(cfg.problem), name=name))
    if allow_oracle and getattr(args, "oracle", False):
        out.append(StaticController(cz_oracle_waveform(cfg.problem.model), name="cz_oracle"))
    return out


def _report_rows(reports, cond_index):
    rows = []
    for rep in reports:
        for i, f in enumerate(rep.fidelities):
            rows.append([rep.controller, cond_index[id(rep)], *rep.condition, i, f])
    return rows


def cmd_train_pgnc(args, cfg):
    from .evaluation import PGNCController, eval_distribution

    try:
        params, history = train_pgnc(cfg.train, cfg.problem)
    except TrainingDiverged as err:
        if err.params is not None:
            save_controller(os.path.join(cfg.out, "pgnc_diverged.ckpt"), err.params, cfg.problem.controller, err.history, cfg.config_hash)
        raise
    ckpt = save_controller(os.path.join(cfg.out, "pgnc.ckpt"), params, cfg.problem.controller, history, cfg.config_hash)
    header, rows = _history_rows(history)
    write_csv(os.path.join(cfg.out, "pgnc_history.csv"), header, rows)
    rep = eval_distribution(PGNCController(params, cfg.problem), NOMINAL, cfg.eval.n_states, cfg.seed, cfg.problem)
    summary = {"command": "train-pgnc", "checkpoint": os.path.basename(ckpt), "final_objective": history[-1]["objective"], "nominal": rep.summary()}
    write_summary(os.path.join(cfg.out, "train_pgnc.json"), summary, cfg.config_hash)
    return summary, 0


def cmd_train_grape(args, cfg):
    from .evaluation import StaticController, eval_distribution

    c = _parse_condition(args.condition)
    params, history = train_grape(cfg.grape.train, c, cfg.problem, init_scale=cfg.grape.init_scale)
    ckpt = save_grape(os.path.join(cfg.out, "grape.ckpt"), params, history, cfg.config_hash)
    header, rows = _history_rows(history)
    write_csv(os.path.join(cfg.out, "grape_history.csv"), header, rows)
    rep = eval_distribution(StaticController(params.waveforms(cfg.problem), "grape"), c, cfg.eval.n_states, cfg.seed, cfg.problem)
    summary = {"command": "train-grape", "checkpoint": os.path.basename(ckpt), "condition": list(c.as_array()), "final_objective": history[-1]["objective"], "trained": rep.summary()}
    write_summary(os.path.join(cfg.out, "train_grape.json"), summary, cfg.config_hash)
    return summary, 0


def cmd_eval(args, cfg):
    from .evaluation import eval_distribution

    ctrls = _controllers(args, cfg, allow_oracle=True)
    if not ctrls:
        raise UsageError("eval needs --checkpoint, --grape or --oracle")
    reports, index = [], {}
    for k, c in enumerate(cfg.eval.conditions):
        for ctrl in ctrls:
            rep = eval_distribution(ctrl, c, cfg.eval.n_states, cfg.seed, cfg.problem)
            index[id(rep)] = k
            reports.append(rep)
    write_csv(
        os.path.join(cfg.out, "eval_states.csv"),
        ["controller", "condition", "c_i", "c_q", "c_f", "state", "fidelity"],
        _report_rows(reports, index),
    )
    summaries = [dict(condition=index[id(r)], **r.summary()) for r in reports]
    keys = list(summaries[0].keys())
    write_csv(os.path.join(cfg.out, "eval_summary.csv"), keys, [[s[k] for k in keys] for s in summaries])
    doc = {"command": "eval", "reports": summaries}
    write_summary(os.path.join(cfg.out, "eval.json"), doc, cfg.config_hash)
    return {"command": "eval", "n_reports": len(reports)}, 0


def cmd_scan_condition(args, cfg):
    from .evaluation import offgrid_scan

    ctrls = _controllers(args, cfg)
    if not args.checkpoint:
        raise UsageError("scan-condition needs --checkpoint")
    pgnc, baselines = ctrls[0], ctrls[1:]
    s = cfg.scan
    rows = offgrid_scan(pgnc, baselines, s.axis("c_i"), s.axis("c_q"), s.c_f_values, s.n_states, cfg.seed, cfg.problem)
    keys = list(rows[0].keys())
    write_csv(os.path.join(cfg.out, "scan_condition.csv"), keys, [[r[k] for k in keys] for r in rows])
    doc = {"command": "scan-condition", "n_cells": len(rows), "controllers": [c.name for c in ctrls]}
    write_summary(os.path.join(cfg.out, "scan_condition.json"), doc, cfg.config_hash)
    return doc, 0


def cmd_scan_detuning(args, cfg):
    from .evaluation import detuning_scan
    from .units import rad_per_ns_to_mhz

    ctrls = _controllers(args, cfg, allow_oracle=True)
    if not ctrls:
        raise UsageError("scan-detuning needs --checkpoint, --grape or --oracle")
    s = cfg.scan
    axis = s.detuning_axis()
    rows = []
    for ctrl in ctrls:
        for r in detuning_scan(ctrl, axis, axis, s.n_states, cfg.seed, cfg.problem, s.fidelity_threshold):
            rows.append([ctrl.name, r["delta_1"], r["delta_2"], rad_per_ns_to_mhz(r["delta_1"]), rad_per_ns_to_mhz(r["delta_2"]), r["avg_fidelity"], r["leakage"], r["above_threshold"]])
    header = ["controller", "delta_1", "delta_2", "delta_1_mhz", "delta_2_mhz", "avg_fidelity", "leakage", "above_threshold"]
    write_csv(os.path.join(cfg.out, "scan_detuning.csv"), header, rows)
    doc = {
        "command": "scan-detuning",
        "n_cells": len(rows),
        "cells_above_threshold": {c.name: int(sum(1 for r in rows if r[0] == c.name and r[-1])) for c in ctrls},
    }
    write_summary(os.path.join(cfg.out, "scan_detuning.json"), doc, cfg.config_hash)
    return doc, 0


def cmd_bench(args, cfg):
    from .evaluation import PGNCController, per_condition_benchmark

    if not args.checkpoint:
        raise UsageError("bench-per-condition needs --checkpoint")
    params, _, _ = load_controller(args.checkpoint, cfg.problem.controller)
    rows, grapes = per_condition_benchmark(
        cfg.eval.conditions,
        PGNCController(params, cfg.problem),
        cfg.problem,
        cfg.grape.train,
        cfg.eval.n_states,
        cfg.seed,
        cfg.grape.init_scale,
    )
    keys = list(rows[0].keys())
    write_csv(os.path.join(cfg.out, "bench_per_condition.csv"), keys, [[r[k] for k in keys] for r in rows])
    means = {}
    for r in rows:
        means.setdefault((r["condition"], r["controller"]), []).append(r["fidelity"])
    doc = {
        "command": "bench-per-condition",
        "grape_trainings": len(grapes),
        "avg_fidelity": [{"condition": k, "controller": name, "avg_fidelity": float(np.mean(v))} for (k, name), v in means.items()],
    }
    write_summary(os.path.join(cfg.out, "bench_per_condition.json"), doc, cfg.config_hash)
    return doc, 0


def cmd_gradcheck(args, cfg):
    from dataclasses import replace

    from .checks import RK4_IMAG_LIMIT, gradcheck, rk4_stability_product

    rows, ok = gradcheck(cfg.problem, seeds=(cfg.seed, cfg.seed + 1, cfg.seed + 2))
    keys = list(rows[0].keys())
    write_csv(os.path.join(cfg.out, "gradcheck.csv"), keys, [[r[k] for k in keys] for r in rows])
    small = replace(cfg.problem, model=replace(cfg.problem.model, n_steps=10), substeps=2)
    doc = {
        "command": "gradcheck",
        "passed": ok,
        "n_coords": len(rows),
        "n_checked": sum(r["checked"] for r in rows),
        "max_rel_err": max(r["rel_err"] for r in rows),
        "rk4_stability_product": rk4_stability_product(small),
        "rk4_imag_limit": RK4_IMAG_LIMIT,
    }
    write_summary(os.path.join(cfg.out, "gradcheck.json"), doc, cfg.config_hash)
    return doc, 0 if ok else 1


def cmd_oracle(args, cfg):
    from .checks import cz_oracle

    res = cz_oracle(cfg.problem)
    doc = {"command": "oracle-check", **res}
    write_summary(os.path.join(cfg.out, "oracle_check.json"), doc, cfg.config_hash)
    return doc, 0 if res["passed"] else 1


HANDLERS = {
    "train-pgnc": cmd_train_pgnc,
    "train-grape": cmd_train_grape,
    "eval": cmd_eval,
    "scan-condition": cmd_scan_condition,
    "scan-detuning": cmd_scan_detuning,
    "bench-per-condition": cmd_bench,
    "gradcheck": cmd_gradcheck,
    "oracle-check": cmd_oracle,
}


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_help(sys.stderr)
        return 2
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out)
        os.makedirs(cfg.out, exist_ok=True)
        doc, code = HANDLERS[args.command](args, cfg)
    except ConfigError as err:
        _emit_error("config", str(err), field=err.field, line=err.line)
        return 1
    except CheckpointError as err:
        _emit_error("checkpoint", str(err))
        return 1
    except UsageError as err:
        _emit_error("usage", str(err))
        return 2
    except TrainingDiverged as err:
        _emit_error("diverged", str(err))
        return 1
    except (ValueError, FloatingPointError, OSError) as err:
        _emit_error(type(err).__name__, str(err))
        return 1
    _emit(doc)
    return code


if __name__ == "__main__":
    sys.exit(main())
