"""Command-line interface.

Exit codes: 0 success, 1 audit found violations, 2 invalid arguments,
3 unreadable or malformed input file, 4 solver or model failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import audit as audit_mod
from .blackbox import DEFAULT_MEMORY_BUDGET, build_grid, reshape_grid, reshape_streaming
from .errors import InvalidInputError, InvalidModelError, ModelParseError, SolverError
from .io import read_matrix, read_tensor, read_vector, write_table, write_tensor
from .reshape import run_reshape
from .shape import ShapeSpec
from .trees import load_forest, save_forest

log = logging.getLogger("rulereshape")

EXIT_OK, EXIT_VIOLATIONS, EXIT_ARGS, EXIT_PARSE, EXIT_SOLVER = 0, 1, 2, 3, 4


def _emit_json(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _names(arg: str | None) -> list[str] | None:
    return [s.strip() for s in arg.split(",")] if arg else None


def _spec(args, header_names=None) -> ShapeSpec:
    return ShapeSpec.parse(args.shape, _names(getattr(args, "feature_names", None)) or header_names)


def cmd_reshape(args) -> int:
    model = load_forest(args.model)
    spec = _spec(args)
    reshaped, report = run_reshape(model, spec, args.method, jobs=args.jobs)
    save_forest(reshaped, args.out)
    log.info("wrote %s", args.out)
    _emit_json(report.to_dict(), args.report)
    return EXIT_OK


def cmd_blackbox(args) -> int:
    X, names = read_matrix(args.data, header=args.header, delimiter=args.delimiter)
    spec = _spec(args, names)
    n, R = X.shape[0], len(spec)
    if args.tensor:
        grid = read_tensor(args.tensor, X, spec, delimiter=args.delimiter)
        rg = reshape_grid(grid, spec, jobs=args.jobs)
        preds, objs = rg.predictions, rg.objectives
        if args.tensor_out:
            write_tensor(args.tensor_out, rg.values, spec.variables)
    else:
        model = load_forest(args.model)
        if n * n * R > args.memory_budget or args.stream:
            if n * n * R > args.memory_budget:
                log.warning("grid of %d entries exceeds budget %d; streaming per point",
                            n * n * R, args.memory_budget)
            preds, objs = reshape_streaming(X, model, spec)
        else:
            grid = build_grid(X, model, spec, memory_budget=args.memory_budget)
            rg = reshape_grid(grid, spec, jobs=args.jobs)
            preds, objs = rg.predictions, rg.objectives
            if args.tensor_out:
                write_tensor(args.tensor_out, rg.values, spec.variables)
    rows = ((i + 1, float(p), float(o)) for i, (p, o) in enumerate(zip(preds, objs)))
    if args.out:
        write_table(args.out, ["i", "prediction", "objective"], rows)
        _emit_json({"n": n, "variables": spec.variables,
                    "objective": float(np.sum(objs))}, None)
    else:
        write_table(sys.stdout, ["i", "prediction", "objective"], rows)
    return EXIT_OK


def cmd_audit(args) -> int:
    X = names = None
    if args.data:
        X, names = read_matrix(args.data, header=args.header, delimiter=args.delimiter)
    spec = _spec(args, names)
    report: dict = {}
    if args.tensor:
        if X is None:
            raise InvalidInputError("--tensor requires --data")
        grid = read_tensor(args.tensor, X, spec, delimiter=args.delimiter)
        result = audit_mod.audit_grid(grid.values, grid.coords, spec)
        report["grid"] = result.to_dict()
        if args.off_grid:
            if not args.model:
                raise InvalidInputError("--off-grid needs --model")
            off = audit_mod.audit_forest(load_forest(args.model), spec,
                                         audit_mod.ranges_from_data(X), args.probes,
                                         args.grid_size, args.seed)
            report["off_grid"] = off.to_dict()
    elif args.model:
        model = load_forest(args.model)
        ranges = audit_mod.ranges_from_data(X) if X is not None else None
        result = audit_mod.audit_forest(model, spec, ranges, args.probes, args.grid_size, args.seed)
        report = result.to_dict()
    else:
        raise InvalidInputError("audit needs --model or --tensor")
    _emit_json(report, args.out)
    return EXIT_OK if result.passed else EXIT_VIOLATIONS


def cmd_eval(args) -> int:
    pred = read_vector(args.pred)
    truth = read_vector(args.truth)
    metrics = ["mse", "mape", "accuracy"] if args.metric == "all" else [args.metric]
    out = {}
    for m in metrics:
        if m == "accuracy":
            out[m] = audit_mod.accuracy(pred, truth, args.threshold)
        else:
            out[m] = getattr(audit_mod, m)(pred, truth)
    _emit_json(out, args.out)
    return EXIT_OK


def _parse_sweep(text: str):
    parts = text.split(",")
    if len(parts) != 4:
        raise InvalidInputError("--sweep expects var,lo,hi,steps")
    try:
        var, lo, hi, steps = int(parts[0]), float(parts[1]), float(parts[2]), int(parts[3])
    except ValueError:
        raise InvalidInputError(f"bad --sweep value {text!r}") from None
    if steps < 2 or not lo < hi:
        raise InvalidInputError("--sweep needs lo < hi and steps >= 2")
    return var, lo, hi, steps


def cmd_predict(args) -> int:
    model = load_forest(args.model)
    X = None
    if args.data:
        X, _ = read_matrix(args.data, header=args.header, delimiter=args.delimiter)
    out = args.out or sys.stdout
    if args.sweep:
        var, lo, hi, steps = _parse_sweep(args.sweep)
        if not 0 <= var < model.n_features:
            raise InvalidInputError(f"sweep variable {var} out of range")
        if args.point:
            base = np.array([float(s) for s in args.point.split(",")])
        elif X is not None:
            base = X[0]
        else:
            raise InvalidInputError("--sweep needs --point or --data")
        if len(base) != model.n_features:
            raise InvalidInputError(f"base point has {len(base)} features, model has {model.n_features}")
        xs = np.linspace(lo, hi, steps)
        pts = np.repeat(base[None, :], steps, axis=0)
        pts[:, var] = xs
        preds = model.predict(pts)
        write_table(out, [f"x{var}", "prediction"], zip(xs.tolist(), preds.tolist()))
        return EXIT_OK
    if X is None:
        raise InvalidInputError("predict needs --data or --sweep")
    preds = model.predict(X)
    write_table(out, ["prediction"], ((float(p),) for p in preds))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rulereshape",
                                description="Enforce monotonicity on trained prediction rules.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def data_opts(sp):
        sp.add_argument("--data", help="observed features, delimited text, n rows x d columns")
        sp.add_argument("--header", action="store_true", help="data file has a header row")
        sp.add_argument("--delimiter", default=",")

    def shape_opts(sp):
        sp.add_argument("--shape", required=True, help='e.g. "0:inc,3:dec"')
        sp.add_argument("--feature-names", help="comma-separated names usable in --shape")

    jobs_default = os.cpu_count() or 1

    sp = sub.add_parser("reshape", help="reshape forest leaf values")
    sp.add_argument("--model", required=True)
    shape_opts(sp)
    sp.add_argument("--method", default="overconstrained",
                    choices=["exact", "ex", "overconstrained", "oc"])
    sp.add_argument("--out", required=True, help="reshaped model path")
    sp.add_argument("--report", help="write the JSON report here instead of stdout")
    sp.add_argument("--jobs", type=int, default=jobs_default)
    sp.set_defaults(func=cmd_reshape)

    sp = sub.add_parser("blackbox", help="black-box reshaping on the observed points")
    data_opts(sp)
    shape_opts(sp)
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--model")
    src.add_argument("--tensor", help="precomputed predictions with columns i,k,v,value")
    sp.add_argument("--out", help="predictions file (i,prediction,objective)")
    sp.add_argument("--tensor-out", help="also write the reshaped tensor")
    sp.add_argument("--memory-budget", type=int, default=DEFAULT_MEMORY_BUDGET)
    sp.add_argument("--stream", action="store_true", help="never hold the full grid")
    sp.add_argument("--jobs", type=int, default=jobs_default)
    sp.set_defaults(func=cmd_blackbox)

    sp = sub.add_parser("audit", help="count monotonicity violations")
    sp.add_argument("--model")
    sp.add_argument("--tensor", help="audit this prediction tensor on its own grid")
    sp.add_argument("--off-grid", action="store_true",
                    help="with --tensor and --model, also report a random-sweep audit of the model")
    data_opts(sp)
    shape_opts(sp)
    sp.add_argument("--probes", type=int, default=100)
    sp.add_argument("--grid-size", type=int, default=50)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_audit)

    sp = sub.add_parser("eval", help="accuracy metrics")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--truth", required=True)
    sp.add_argument("--metric", default="mse", choices=["mse", "mape", "accuracy", "all"])
    sp.add_argument("--threshold", type=float, default=0.5)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("predict", help="forest predictions or a one-variable sweep")
    sp.add_argument("--model", required=True)
    data_opts(sp)
    sp.add_argument("--sweep", help="var,lo,hi,steps")
    sp.add_argument("--point", help="comma-separated base point for --sweep")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_predict)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        log.error("--jobs must be >= 1")
        return EXIT_ARGS
    try:
        return args.func(args)
    except ModelParseError as exc:
        log.error("parse error: %s", exc)
        return EXIT_PARSE
    except InvalidInputError as exc:
        log.error("invalid arguments: %s", exc)
        return EXIT_ARGS
    except (SolverError, InvalidModelError) as exc:
        log.error("solver error: %s", exc)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
