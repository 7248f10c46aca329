"""Command-line interface: ``rtdtopo run | verify | schedule``."""

import argparse
import logging
import os
import sys
import warnings

import numpy as np
from threadpoolctl import threadpool_limits

from .config import ConfigError, default_config, parse_config
from .io import write_comparison_csv, write_history_csv, write_snapshot
from .levelset import run_levelset
from .optimizer import NonConvergenceWarning, make_schedule, run

log = logging.getLogger("rtdtopo")

THREADS_ENV = "RTD_TOPOPT_THREADS"


def _threads():
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise SystemExit(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    if n < 1:
        raise SystemExit(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def _run_method(method, cfg, problem, out_dir, timing):
    schedule = cfg.schedule()
    tau = cfg.tau_value()

    def emit(rec):
        write_snapshot(out_dir, method, problem.grid, rec)
        log.info("%s step %d t=%.5f cost=%.6g iters=%d%s", method, rec.step, rec.t, rec.cost,
                 rec.iterations, "" if rec.converged else " (not converged)")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        if method == "closed_form":
            history = run(problem, schedule, tau, cfg.tol_chi, cfg.tol_c, cfg.max_iter,
                          cfg.relax, callback=emit)
        else:
            history = run_levelset(problem, schedule, tau, cfg.k, cfg.rho, cfg.tol_chi,
                                   cfg.tol_lambda, cfg.max_iter, callback=emit)
    write_history_csv(os.path.join(out_dir, f"history_{method}.csv"), history, timing)
    return history


def cmd_run(args):
    try:
        cfg = parse_config(args.config) if args.config else default_config()
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        warnings.warn("--seed is ignored: the solvers have no stochastic components",
                      stacklevel=1)
    out_dir = args.out or cfg.output_dir or "out"
    os.makedirs(out_dir, exist_ok=True)
    timing = args.timing or cfg.timing
    problem = cfg.build_problem()
    methods = ["closed_form", "levelset"] if args.method == "both" else [args.method]
    histories = {m: _run_method(m, cfg, problem, out_dir, timing) for m in methods}
    if args.method == "both":
        write_comparison_csv(os.path.join(out_dir, "comparison.csv"),
                             histories["closed_form"], histories["levelset"])
    failed = [(m, r.step) for m, h in histories.items() for r in h if not r.converged]
    if failed:
        print(f"error: non-converged steps {failed}", file=sys.stderr)
        return 1
    return 0


def cmd_schedule(args):
    try:
        s = make_schedule(args.n, args.K, args.t0, args.T)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for i, t in enumerate(s.times):
        print(f"{i} {t:.17g}")
    return 0


def cmd_verify(args):
    from .verify import run_checks

    results = run_checks()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return 0 if all(ok for _, ok, _ in results) else 1


def build_parser():
    p = argparse.ArgumentParser(prog="rtdtopo", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a benchmark configuration")
    r.add_argument("--config", help="INI configuration file (default: 2D cantilever)")
    r.add_argument("--method", choices=("closed_form", "levelset", "both"),
                   default="closed_form")
    r.add_argument("--out", help="output directory")
    r.add_argument("--seed", type=int, help="accepted and ignored")
    r.add_argument("--timing", action="store_true", help="record wall_ms in the CSV")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("schedule", help="print the pseudo-time schedule")
    s.add_argument("--n", type=int, default=40)
    s.add_argument("--K", type=float, default=-4.5)
    s.add_argument("--t0", type=float, default=0.0)
    s.add_argument("--T", type=float, default=1.0)
    s.set_defaults(func=cmd_schedule)

    v = sub.add_parser("verify", help="run the built-in oracle checks")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    np.seterr(all="ignore")
    with threadpool_limits(limits=_threads()):
        return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
