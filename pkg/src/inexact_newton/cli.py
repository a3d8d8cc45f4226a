"""Command-line harness: single runs, method grids, sigma sweeps and self-checks."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .checks import run_checks
from .data_io import make_synthetic_dataset, parse_libsvm, write_trace_csv
from .errors import NumericalError, ParseError, UsageError
from .oracle import PropLedger
from .optimizers import NUMERICAL, OptimizerConfig, RunResult, run_arc, run_tr
from .problems import NlsProblem, QuadraticProblem, RosenbrockProblem, make_saddle_problem
from .sampling import SampleConfig

log = logging.getLogger("inexact_newton")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

# method -> (outer loop, sample gradient, sample Hessian)
METHODS = {
    "tr-full": ("tr", False, False),
    "tr-subh": ("tr", False, True),
    "tr-inexact": ("tr", True, True),
    "arc-full": ("arc", False, False),
    "arc-subh": ("arc", False, True),
    "arc-inexact": ("arc", True, True),
    "arc-fixed-sigma": ("arc", True, True),
}
PROBLEMS = ("nls", "quadratic", "rosenbrock", "saddle")
DEFAULT_SIGMAS = "1e-2,1e-1,1,1e1,1e2,1e3"


def _float_list(text):
    items = [t.strip() for t in str(text).split(",") if t.strip()]
    try:
        return [float(t) for t in items], items
    except ValueError:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of integers, got {text!r}") from None


def _common_parser():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("problem")
    g.add_argument("--problem", choices=PROBLEMS, default="nls", help="objective to minimize")
    g.add_argument("--data", default=None, help="LIBSVM file for --problem nls (synthetic data if omitted)")
    g.add_argument("--synthetic-n", type=int, default=5000, help="rows of the synthetic NLS dataset")
    g.add_argument("--synthetic-d", type=int, default=22, help="features of the synthetic NLS dataset")
    g.add_argument("--data-seed", type=int, default=0, help="seed of the synthetic NLS dataset")
    g.add_argument("--scale-features", action="store_true", help="max-abs scale each feature at ingestion")
    g.add_argument("--flip-labels", action="store_true", help="map the larger raw label to 0 instead of 1")
    g.add_argument("--quadratic-diag", default="1,10", help="diagonal of A for --problem quadratic")
    g.add_argument("--curvatures", default="1,-1", help="curvatures for --problem saddle")
    g.add_argument("--quartic", type=float, default=1.0, help="quartic confinement for --problem saddle")
    g.add_argument("--rosenbrock-dim", type=int, default=2, help="dimension for --problem rosenbrock")
    g.add_argument("--weights", default="1,2,4", help="propagation weights w_f,w_g,w_h")

    o = p.add_argument_group("optimizer")
    o.add_argument("--eps-g", type=float, default=1e-5, help="gradient tolerance")
    o.add_argument("--eps-h", type=float, default=1e-3, help="curvature tolerance")
    o.add_argument("--eta", type=float, default=0.1, help="acceptance threshold on rho")
    o.add_argument("--gamma", type=float, default=2.0, help="radius/sigma update factor")
    o.add_argument("--delta0", type=float, default=1.0, help="initial trust-region radius")
    o.add_argument("--sigma0", type=float, default=10.0, help="initial cubic regularization")
    o.add_argument("--fixed-sigma", type=float, default=None,
                   help="fixed sigma for arc-fixed-sigma (defaults to --sigma0)")
    o.add_argument("--nu", type=float, default=0.9, help="curvature estimate quality target")
    o.add_argument("--arc-mode", choices=("cauchy", "lanczos"), default="lanczos",
                   help="cubic sub-problem solver")
    o.add_argument("--zero-small-grad", action="store_true",
                   help="drop the gradient from the model when ||g|| <= eps-g")
    o.add_argument("--grad-ratio", type=float, default=0.1, help="gradient sampling ratio (inexact methods)")
    o.add_argument("--hess-ratio", type=float, default=0.01, help="Hessian sampling ratio (subh/inexact methods)")
    o.add_argument("--max-iters", type=int, default=1000, help="outer iteration cap")
    o.add_argument("--max-props", type=int, default=None, help="propagation budget (none if omitted)")
    o.add_argument("--timing", action="store_true",
                   help="record wall time in the trace (breaks bitwise reproducibility)")

    r = p.add_argument_group("output")
    r.add_argument("--out", default=None, help="output directory (stdout summary only if omitted)")
    r.add_argument("--config", default=None, help="JSON file with defaults for any flag; flags win")
    r.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return p


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(
        prog="inexact-newton", formatter_class=fmt,
        description="Inexact trust-region and cubic-regularization Newton methods.",
        epilog="Environment: NEWTON_THREADS caps BLAS threads and parallel grid cells (default 1).",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()

    run = sub.add_parser("run", parents=[common], formatter_class=fmt, help="single optimizer run")
    run.add_argument("--method", choices=tuple(METHODS), default="tr-inexact", help="method")
    run.add_argument("--seed", type=int, default=42, help="sampling seed")

    cmp_ = sub.add_parser("compare", parents=[common], formatter_class=fmt, help="methods x seeds grid")
    cmp_.add_argument("--methods", default="tr-full,tr-subh,tr-inexact",
                      help="comma-separated methods")
    cmp_.add_argument("--seeds", default="42", help="comma-separated seeds")

    sweep = sub.add_parser("sigma-sweep", parents=[common], formatter_class=fmt,
                           help="adaptive vs fixed sigma at a fixed budget")
    sweep.add_argument("--sigmas", default=DEFAULT_SIGMAS, help="comma-separated sigma values")
    sweep.add_argument("--seeds", default="42", help="comma-separated seeds")

    check = sub.add_parser("check", formatter_class=fmt, help="built-in invariant suite")
    check.add_argument("--perturb-gradient", type=float, default=0.0,
                       help="test hook: add this offset to the NLS gradient (negative control)")
    return parser


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    path = getattr(args, "config", None)
    if path:
        try:
            with open(path) as fh:
                overrides = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        known = vars(args)
        unknown = [k for k in overrides if k.replace("-", "_") not in known]
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in overrides.items()})
        args = parser.parse_args(argv)
    return args


def _ledger(args):
    w = _int_list(args.weights)
    if len(w) != 3 or min(w) < 1:
        raise UsageError("--weights needs three positive integers")
    return PropLedger(*w)


def load_dataset(args):
    if args.data is None:
        if args.synthetic_n < 1 or args.synthetic_d < 1:
            raise UsageError("synthetic dataset sizes must be positive")
        return make_synthetic_dataset(args.synthetic_n, args.synthetic_d, seed=args.data_seed)
    if not Path(args.data).is_file():
        raise UsageError(f"dataset not found: {args.data}")
    try:
        return parse_libsvm(args.data, scale_features=args.scale_features, flip_labels=args.flip_labels)
    except ParseError as exc:
        raise UsageError(f"{args.data}: {exc}") from exc


def make_problem(args, dataset=None):
    ledger = _ledger(args)
    if args.problem == "nls":
        return NlsProblem(dataset if dataset is not None else load_dataset(args), ledger)
    if args.problem == "quadratic":
        diag, _ = _float_list(args.quadratic_diag)
        return QuadraticProblem(np.diag(diag), ledger=ledger)
    if args.problem == "rosenbrock":
        return RosenbrockProblem(args.rosenbrock_dim, ledger=ledger)
    curv, _ = _float_list(args.curvatures)
    x0 = np.zeros(len(curv))
    x0[int(np.argmax(curv))] = 1.0
    return make_saddle_problem(curv, quartic=args.quartic, x0=x0, ledger=ledger)


def make_config(args, method, seed, **overrides) -> OptimizerConfig:
    if method not in METHODS:
        raise UsageError(f"unknown method {method!r}")
    _, sample_g, sample_h = METHODS[method]
    sampling = None
    if sample_g or sample_h:
        sampling = SampleConfig(grad_ratio=args.grad_ratio if sample_g else None,
                                hess_ratio=args.hess_ratio if sample_h else None, seed=seed)
    fixed = None
    if method == "arc-fixed-sigma":
        fixed = args.fixed_sigma if args.fixed_sigma is not None else args.sigma0
    cfg = OptimizerConfig(
        eps_g=args.eps_g, eps_h=args.eps_h, eta=args.eta, gamma=args.gamma,
        radius0=args.delta0, sigma0=args.sigma0, nu=args.nu,
        zero_small_grad=args.zero_small_grad, arc_mode=args.arc_mode, fixed_sigma=fixed,
        max_iters=args.max_iters, max_props=args.max_props, sampling=sampling, seed=seed,
        record_time=args.timing,
    )
    return replace(cfg, **overrides) if overrides else cfg


def execute(problem, method, config) -> RunResult:
    runner = run_tr if METHODS[method][0] == "tr" else run_arc
    return runner(problem, config)


def summary(problem_name, method, seed, result: RunResult) -> dict:
    return {
        "method": method,
        "problem": problem_name,
        "seed": seed,
        "final_loss": result.final_loss,
        "total_props": result.total_props,
        "iterations": len(result.trace),
        "termination": result.reason,
    }


def _exit_code(result):
    return EXIT_NUMERICAL if result.reason == NUMERICAL else EXIT_OK


def _workers():
    try:
        return max(1, int(os.environ.get("NEWTON_THREADS", "1")))
    except ValueError:
        raise UsageError("NEWTON_THREADS must be an integer") from None


def _out_dir(args):
    if args.out is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    """One optimizer run; writes ``trace.csv`` and ``summary.json`` under ``--out``."""
    problem = make_problem(args)
    result = execute(problem, args.method, make_config(args, args.method, args.seed))
    info = summary(args.problem, args.method, args.seed, result)
    out = _out_dir(args)
    if out is not None:
        if result.trace:
            write_trace_csv(result.trace, out / "trace.csv")
        (out / "summary.json").write_text(json.dumps(info, indent=2) + "\n")
    print(json.dumps(info))
    if result.reason == NUMERICAL:
        log.error("run ended on a numerical failure: %s", result.message)
    return _exit_code(result)


def _run_cells(args, cells, dataset):
    """Run ``(method, seed, overrides)`` cells, possibly in parallel threads."""

    def one(cell):
        method, seed, overrides = cell
        try:
            problem = make_problem(args, dataset)
            return execute(problem, method, make_config(args, method, seed, **overrides)), None
        except (UsageError, NumericalError) as exc:
            return None, exc

    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        return list(pool.map(one, cells))


def cmd_compare(args) -> int:
    """Methods x seeds grid; merged long-format CSV ``method,seed,iter,props,loss``."""
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    seeds = _int_list(args.seeds)
    if not methods or not seeds:
        raise UsageError("need at least one method and one seed")
    for m in methods:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r}")
    dataset = load_dataset(args) if args.problem == "nls" else None
    cells = [(m, s, {}) for m in methods for s in seeds]
    out = _out_dir(args)
    merged = io.StringIO()
    writer = csv.writer(merged, lineterminator="\n")
    writer.writerow(["method", "seed", "iter", "props", "loss"])
    failed = 0
    summaries = []
    for (method, seed, _), (result, exc) in zip(cells, _run_cells(args, cells, dataset)):
        if exc is not None or result.reason == NUMERICAL:
            failed += 1
            log.error("cell %s seed %d failed: %s", method, seed, exc or result.message)
            if result is None:
                continue
        summaries.append(summary(args.problem, method, seed, result))
        if out is not None and result.trace:
            write_trace_csv(result.trace, out / f"{method}-seed{seed}.csv")
        for rec in result.trace:
            writer.writerow([method, seed, rec.iteration, rec.props, format(rec.loss, ".17g")])
    if out is not None:
        (out / "compare.csv").write_text(merged.getvalue())
        (out / "summary.json").write_text(json.dumps(summaries, indent=2) + "\n")
    else:
        sys.stdout.write(merged.getvalue())
    return EXIT_FAILED if failed else EXIT_OK


def cmd_sigma_sweep(args) -> int:
    """Adaptive ``arc-inexact`` over sigma0 and ``arc-fixed-sigma`` over sigma at one budget."""
    values, texts = _float_list(args.sigmas)
    if not values:
        raise UsageError("the sigma list is empty")
    if any(not v > 0 for v in values):
        raise UsageError("sigma values must be positive")
    seeds = _int_list(args.seeds)
    dataset = load_dataset(args) if args.problem == "nls" else None
    probe = make_problem(args, dataset)
    budget = args.max_props
    if budget is None:
        budget = 50 * probe.n_components * probe.ledger.w_f
    cells, labels = [], []
    for seed in seeds:
        for v, text in zip(values, texts):
            cells.append(("arc-inexact", seed, {"sigma0": v, "max_props": budget}))
            labels.append(("adaptive", text, seed))
            cells.append(("arc-fixed-sigma", seed, {"sigma0": v, "fixed_sigma": v, "max_props": budget}))
            labels.append(("fixed", text, seed))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["mode", "sigma", "seed", "final_loss", "total_props", "iterations", "termination"])
    failed = 0
    for (mode, text, seed), (result, exc) in zip(labels, _run_cells(args, cells, dataset)):
        if result is None:
            failed += 1
            log.error("%s sigma=%s seed %d failed: %s", mode, text, seed, exc)
            writer.writerow([mode, text, seed, "nan", 0, 0, "error"])
            continue
        failed += result.reason == NUMERICAL
        writer.writerow([mode, text, seed, format(result.final_loss, ".17g"), result.total_props,
                         len(result.trace), result.reason])
    out = _out_dir(args)
    if out is not None:
        (out / "sigma_sweep.csv").write_text(buf.getvalue())
    sys.stdout.write(buf.getvalue())
    return EXIT_FAILED if failed else EXIT_OK


def cmd_check(args) -> int:
    """Built-in invariant suite; nonzero exit if any property fails."""
    results = run_checks(perturb_gradient=args.perturb_gradient)
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_FAILED if failed else EXIT_OK


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "sigma-sweep": cmd_sigma_sweep, "check": cmd_check}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        with threadpool_limits(limits=_workers()):
            return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"inexact-newton: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
