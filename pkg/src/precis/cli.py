"""Command-line front end: ``precis {gen,solve,path,bench,diagnose}``.

Matrices are read and written in the plain text format of
:mod:`precis.symmat`.  ``--out`` names an output directory; when it is
given nothing is printed on stdout.  Exit codes: 0 success, 1 usage, I/O
or parse error, 2 ``MaxSweeps`` (or any failed lambda on a path),
3 ``NonPdFailure``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import datagen
from .diagnostics import dual_objective, is_monotone, kkt_residual, write_trace_csv
from .engines import ENGINES, Criterion, Instance, SolverOptions, Status, WarmStart
from .errors import DegenerateMatrix, MatrixFormatError, NotPositiveDefinite
from .pathrun import (PATH_HEADER, PathSpec, Policy, diagonal_path, nonzero_fraction,
                      path_rows, rows_to_csv, run_path)
from .qpcore import InnerOptions
from .symmat import (atomic_write_text, format_matrix, max_abs_offdiag, read_matrix,
                     write_matrix)

EXIT_OK, EXIT_ERROR, EXIT_MAXSWEEPS, EXIT_NONPD = 0, 1, 2, 3

# (label, engine, policy) in table order
VARIANTS = (
    ("Dual-Cold", "glasso", Policy.COLD),
    ("Dual-Warm", "glasso", Policy.WARM),
    ("Primal-Cold", "dpglasso", Policy.COLD),
    ("Primal-Warm", "dpglasso", Policy.WARM),
)
BENCH_TOLS = (1e-4, 1e-5)
TABLE_HEADER = ("p", "n", "tol", "variant", "total_seconds", "avg_zero_frac",
                "total_inner_sweeps", "all_converged")
PER_LAMBDA_HEADER = ("tol", "variant", "index", "lambda", "status", "wall_ns",
                     "nonzero_frac", "total_inner_sweeps")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # exit code 2 is reserved for MaxSweeps
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _positive(kind):
    def conv(text):
        val = kind(text)
        if not val > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return val
    return conv


def _add_instance_args(p):
    g = p.add_argument_group("instance")
    g.add_argument("--in", dest="input", help="covariance matrix file")
    g.add_argument("--gen", choices=[k.value for k in datagen.Kind],
                   help="generate the instance instead of reading it")
    g.add_argument("--fixture", choices=["appendix1", "nonmonotone"],
                   help="use a shipped fixture")
    g.add_argument("--p", type=_positive(int), default=30)
    g.add_argument("--n", type=_positive(int), default=None, help="sample size (default 2p)")
    g.add_argument("--tau", type=_positive(float), default=1.0)
    g.add_argument("--seed", type=int, default=0)


def _add_solver_args(p, engine_default="dpglasso"):
    g = p.add_argument_group("solver")
    g.add_argument("--engine", choices=sorted(ENGINES), default=engine_default)
    g.add_argument("--tol", type=_positive(float), default=1e-4)
    g.add_argument("--tol-inner", type=_positive(float), default=1e-10)
    g.add_argument("--criterion", choices=[c.value for c in Criterion],
                   default=Criterion.PRIMAL_OBJECTIVE.value)
    g.add_argument("--max-sweeps", type=_positive(int), default=1000)


def _add_grid_args(p):
    g = p.add_argument_group("lambda grid")
    g.add_argument("--grid-k", type=_positive(int), default=20)
    g.add_argument("--ratio", type=float, default=0.8)
    g.add_argument("--frac", type=float, default=0.9)


def build_parser():
    parser = _Parser(prog="precis", description="l1-penalized precision matrix estimation")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic covariance matrix")
    p.add_argument("--gen", choices=[k.value for k in datagen.Kind], default="type2")
    p.add_argument("--p", type=_positive(int), default=30)
    p.add_argument("--n", type=_positive(int), default=None, help="sample size (default 2p)")
    p.add_argument("--tau", type=_positive(float), default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--zero-frac", type=float, default=0.77)
    p.add_argument("--out", help="directory for S.txt, theta_true.txt and X.csv")

    p = sub.add_parser("solve", help="solve one instance")
    _add_instance_args(p)
    _add_solver_args(p)
    p.add_argument("--lambda", dest="lam", type=_positive(float))
    p.add_argument("--warm-theta", help="warm-start precision matrix file")
    p.add_argument("--warm-w", help="warm-start covariance matrix file")
    p.add_argument("--out", help="directory for theta.txt, w.txt and summary.json")

    p = sub.add_parser("path", help="solve along a lambda grid")
    _add_instance_args(p)
    _add_solver_args(p)
    _add_grid_args(p)
    p.add_argument("--policy", choices=[x.value for x in Policy], default="warm")
    p.add_argument("--save-thetas", action="store_true",
                   help="also write theta_<i>.txt per lambda")
    p.add_argument("--out", help="directory for path.csv")

    p = sub.add_parser("bench", help="time the four path variants")
    _add_instance_args(p)
    _add_grid_args(p)
    p.add_argument("--repeats", type=_positive(int), default=5)
    p.add_argument("--tols", type=_positive(float), nargs="+", default=list(BENCH_TOLS))
    p.add_argument("--tol-inner", type=_positive(float), default=1e-10)
    p.add_argument("--out", help="directory for table.csv and per_lambda.csv")

    p = sub.add_parser("diagnose", help="trace one run and check monotonicity")
    _add_instance_args(p)
    _add_solver_args(p, engine_default="glasso")
    p.add_argument("--lambda", dest="lam", type=_positive(float))
    p.add_argument("--trace", help="trace CSV path")
    p.add_argument("--out", help="directory for trace.csv and summary.json")
    return parser


def _load_instance(args):
    """Return ``(S, n, default_lambda)`` for the instance arguments."""
    sources = [x for x in (args.input, args.gen, args.fixture) if x]
    if len(sources) > 1:
        raise UsageError("give only one of --in, --gen, --fixture")
    if args.fixture == "appendix1":
        S = datagen.appendix_example1_fixture()
        return S, 2, 0.9 * max_abs_offdiag(S)
    if args.fixture == "nonmonotone":
        S, lam = datagen.glasso_nonmonotone_fixture()
        return S, datagen.NONMONOTONE_N, lam
    if args.input:
        return read_matrix(args.input), None, None
    kind = args.gen or "type2"
    n = args.n or 2 * args.p
    spec = datagen.GeneratorSpec(kind, args.p, tau=args.tau, seed=args.seed)
    ds = datagen.generate(spec, n=n)
    return ds.S, (None if ds.n is None else n), None


def _solver_options(args, **kw):
    return SolverOptions(tol_outer=args.tol, criterion=args.criterion,
                         max_outer_sweeps=args.max_sweeps,
                         inner=InnerOptions(tol_inner=args.tol_inner), **kw)


def _outdir(args):
    if not args.out:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n"


def _exit_for(status):
    return {Status.CONVERGED: EXIT_OK, Status.MAX_SWEEPS: EXIT_MAXSWEEPS,
            Status.NON_PD_FAILURE: EXIT_NONPD}[status]


def _fit_summary(res, S):
    try:
        g = dual_objective(res.W - S, S)
    except NotPositiveDefinite:
        g = math.nan
    try:
        kkt = kkt_residual(res.Theta, S, res.lam)
    except NotPositiveDefinite:
        kkt = math.nan
    return {
        "engine": res.engine,
        "lambda": res.lam,
        "status": res.status.value,
        "f_primal": _num(res.f_primal),
        "g_dual": _num(g),
        "kkt_residual": _num(kkt),
        "outer_sweeps": res.outer_sweeps,
        "total_inner_sweeps": res.total_inner_sweeps,
        "nonzero_frac": nonzero_fraction(res.Theta, res.engine),
        "solve_seconds": res.solve_ns * 1e-9,
        "failed_column": res.failed_column,
        "failed_min_eig": None if res.failed_min_eig is None else _num(res.failed_min_eig),
    }


def _lambda(args, default):
    lam = args.lam if args.lam is not None else default
    if lam is None:
        raise UsageError("--lambda is required for this instance")
    return lam


def cmd_gen(args):
    n = args.n or 2 * args.p
    spec = datagen.GeneratorSpec(args.gen, args.p, zero_frac=args.zero_frac, tau=args.tau,
                                 seed=args.seed)
    ds = datagen.generate(spec, n=n)
    out = _outdir(args)
    if out is None:
        sys.stdout.write(format_matrix(ds.S))
    else:
        write_matrix(out / "S.txt", ds.S)
        write_matrix(out / "theta_true.txt", ds.Theta_true)
        if ds.X is not None:
            atomic_write_text(out / "X.csv", datagen.samples_to_csv(ds.X))
    return EXIT_OK


def cmd_solve(args):
    S, _, lam0 = _load_instance(args)
    lam = _lambda(args, lam0)
    warm = None
    if args.warm_theta or args.warm_w:
        warm = WarmStart(W0=read_matrix(args.warm_w) if args.warm_w else None,
                         Theta0=read_matrix(args.warm_theta) if args.warm_theta else None)
    res = ENGINES[args.engine](Instance(S, lam), _solver_options(args, warm=warm))
    summary = _fit_summary(res, S)
    out = _outdir(args)
    if out is None:
        sys.stdout.write(_json(summary))
    else:
        write_matrix(out / "theta.txt", res.Theta)
        write_matrix(out / "w.txt", res.W)
        atomic_write_text(out / "summary.json", _json(summary))
    return _exit_for(res.status)


def _path_spec(args, engine, policy, tol=None):
    opts = _solver_options(args)
    if tol is not None:
        opts = replace(opts, tol_outer=tol)
    return PathSpec(K=args.grid_k, ratio=args.ratio, frac=args.frac, engine=engine,
                    policy=policy, opts=opts)


def cmd_path(args):
    S, _, _ = _load_instance(args)
    spec = _path_spec(args, args.engine, args.policy)
    try:
        result = run_path(S, spec)
    except DegenerateMatrix as exc:
        print(f"precis: {exc}", file=sys.stderr)
        result = diagonal_path(S, spec)
    text = rows_to_csv(PATH_HEADER, path_rows(S, result))
    out = _outdir(args)
    if out is None:
        sys.stdout.write(text)
    else:
        atomic_write_text(out / "path.csv", text)
        if args.save_thetas:
            for i, f in enumerate(result.fits):
                write_matrix(out / f"theta_{i:03d}.txt", f.Theta)
    return EXIT_OK if result.all_converged else EXIT_MAXSWEEPS


def _threads():
    try:
        return max(1, int(os.environ.get("PRECIS_THREADS", "1")))
    except ValueError:
        return 1


def run_bench(S, n, tols, repeats, grid_k=20, ratio=0.8, frac=0.9, tol_inner=1e-10):
    """Run every (TOL, variant) cell ``repeats`` times.

    Returns ``(table_rows, per_lambda_rows)``.  ``total_seconds`` and the
    per-lambda ``wall_ns`` are means over repeats; solutions are
    deterministic, so zero fractions and sweep counts come from the first
    repeat.
    """
    S = np.asarray(S, dtype=np.float64)
    cells = [(tol, label, engine, policy) for tol in tols for label, engine, policy in VARIANTS]

    def run_cell(cell):
        tol, label, engine, policy = cell
        spec = PathSpec(K=grid_k, ratio=ratio, frac=frac, engine=engine, policy=policy,
                        opts=SolverOptions(tol_outer=tol, inner=InnerOptions(tol_inner=tol_inner)))
        runs = [run_path(S, spec) for _ in range(repeats)]
        return cell, runs

    workers = min(_threads(), len(cells))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(run_cell, cells))
    else:
        done = [run_cell(c) for c in cells]

    p = S.shape[0]
    table, per_lambda = [], []
    for (tol, label, engine, _), runs in done:
        first = runs[0]
        table.append({
            "p": p, "n": "" if n is None else n, "tol": tol, "variant": label,
            "total_seconds": float(np.mean([r.total_seconds for r in runs])),
            "avg_zero_frac": float(np.mean([1.0 - z for z in first.nonzero_fraction])),
            "total_inner_sweeps": first.total_inner_sweeps,
            "all_converged": all(r.all_converged for r in runs),
        })
        walls = np.mean([r.wall_times for r in runs], axis=0)
        for i, lam in enumerate(first.lambdas):
            f = first.fits[i]
            per_lambda.append({
                "tol": tol, "variant": label, "index": i, "lambda": lam,
                "status": f.status.value, "wall_ns": int(round(walls[i])),
                "nonzero_frac": first.nonzero_fraction[i],
                "total_inner_sweeps": f.total_inner_sweeps,
            })
    return table, per_lambda


def cmd_bench(args):
    S, n, _ = _load_instance(args)
    try:
        table, per_lambda = run_bench(S, n, args.tols, args.repeats, args.grid_k, args.ratio,
                                      args.frac, args.tol_inner)
    except DegenerateMatrix as exc:
        print(f"precis: {exc}", file=sys.stderr)
        return EXIT_ERROR
    table_text = rows_to_csv(TABLE_HEADER, table)
    out = _outdir(args)
    if out is None:
        sys.stdout.write(table_text)
    else:
        atomic_write_text(out / "table.csv", table_text)
        atomic_write_text(out / "per_lambda.csv", rows_to_csv(PER_LAMBDA_HEADER, per_lambda))
    return EXIT_OK if all(r["all_converged"] for r in table) else EXIT_MAXSWEEPS


def cmd_diagnose(args):
    S, _, lam0 = _load_instance(args)
    lam = _lambda(args, lam0)
    res = ENGINES[args.engine](Instance(S, lam), _solver_options(args, emit_trace=True))
    f = [r.f_primal for r in res.trace]
    g = [r.g_dual for r in res.trace]
    f_ok = is_monotone(f, "down")
    g_ok = is_monotone(g, "up")
    increases = int(np.sum(np.diff(f) > 1e-10 * np.abs(f[:-1]))) if len(f) > 1 else 0
    summary = dict(_fit_summary(res, S), primal_monotone=f_ok, dual_monotone=g_ok,
                   primal_increases=increases, records=len(res.trace))
    out = _outdir(args)
    if args.trace:
        write_trace_csv(args.trace, res.trace)
    if out is not None:
        if not args.trace:
            write_trace_csv(out / "trace.csv", res.trace)
        atomic_write_text(out / "summary.json", _json(summary))
    else:
        print(f"engine: {res.engine}")
        print(f"status: {res.status.value}")
        print(f"primal monotone: {str(f_ok).lower()}")
        print(f"dual monotone: {str(g_ok).lower()}")
        print(f"primal increases: {increases}")
    return _exit_for(res.status)


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "path": cmd_path, "bench": cmd_bench,
            "diagnose": cmd_diagnose}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(name)s: %(message)s")
    logging.captureWarnings(True)
    if args.command == "bench" and not args.verbose:
        # warm GLASSO paths warn at nearly every lambda
        logging.getLogger("precis.pathrun").setLevel(logging.ERROR)
    fmt = warnings.formatwarning
    warnings.formatwarning = lambda msg, cat, *_a, **_k: f"{cat.__name__}: {msg}"
    try:
        return COMMANDS[args.command](args)
    except (MatrixFormatError, UsageError, OSError, ValueError) as exc:
        print(f"precis: {exc}", file=sys.stderr)
        return EXIT_ERROR
    finally:
        warnings.formatwarning = fmt


if __name__ == "__main__":
    sys.exit(main())
