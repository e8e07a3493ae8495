"""Regularization paths with cold or warm starts."""

from __future__ import annotations

import csv
import enum
import io
import logging
import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List

import numpy as np

from .diagnostics import dual_objective, kkt_residual
from .engines import ENGINES, FitResult, Instance, SolverOptions, Status, WarmStart
from .errors import DegenerateMatrix, NotPositiveDefinite, WarmStartInfeasible
from .symmat import atomic_write_text, is_pd, max_abs_offdiag, min_eigenvalue

log = logging.getLogger(__name__)

NONZERO_TOL = 1e-10

PATH_HEADER = ("lambda", "status", "outer_sweeps", "total_inner_sweeps", "wall_ns",
               "nonzero_frac", "f_primal", "g_dual", "kkt_residual", "warm_feasible")


class Policy(str, enum.Enum):
    COLD = "cold"
    WARM = "warm"


@dataclass(frozen=True)
class PathSpec:
    K: int = 20
    ratio: float = 0.8
    frac: float = 0.9
    engine: str = "dpglasso"
    policy: Policy = Policy.WARM
    opts: SolverOptions = SolverOptions()

    def __post_init__(self):
        object.__setattr__(self, "policy", Policy(self.policy))
        if self.engine not in ENGINES:
            raise ValueError(f"unknown engine {self.engine!r}")
        if not 0 < self.ratio < 1:
            raise ValueError("ratio must lie in (0, 1)")
        if not 0 < self.frac <= 1:
            raise ValueError("frac must lie in (0, 1]")
        if self.K < 1:
            raise ValueError("K must be >= 1")


@dataclass
class PathResult:
    """Per-lambda fits in decreasing-lambda order.

    ``fallbacks`` maps a grid index to the cold-start refit made after a
    warm start ended in ``NonPdFailure``; ``fits`` keeps the failed run.
    ``wall_times`` are engine update times in ns, objective evaluation
    excluded.
    """

    lambdas: np.ndarray
    fits: List[FitResult]
    warm_feasible: List[bool]
    wall_times: List[int]
    nonzero_fraction: List[float]
    fallbacks: Dict[int, FitResult] = field(default_factory=dict)

    @property
    def total_seconds(self):
        return sum(self.wall_times) * 1e-9

    @property
    def total_inner_sweeps(self):
        return sum(f.total_inner_sweeps for f in self.fits)

    @property
    def all_converged(self):
        return all(f.converged for f in self.fits)


def lambda_grid(S, spec: PathSpec = PathSpec()):
    """``ratio**i * frac * lambda_max`` for ``i = 1..K``, largest first."""
    lmax = max_abs_offdiag(S)
    if lmax == 0:
        raise DegenerateMatrix("S is diagonal (lambda_max = 0); the solution is "
                               "diag(1 / (s_ii + lambda)) for every lambda")
    i = np.arange(1, spec.K + 1)
    return spec.ratio ** i * spec.frac * lmax


def warm_feasibility_check(Z, S, lam):
    """Sufficient condition for GLASSO warm starts to keep ``W`` PD."""
    Z = np.asarray(Z)
    if not np.all(np.isfinite(Z)):
        return False
    return bool(min_eigenvalue(Z) > 0 and np.max(np.abs(Z - S)) <= lam + 1e-12)


def nonzero_fraction(Theta, engine):
    """Fraction of off-diagonal entries counted as nonzero."""
    p = Theta.shape[0]
    if p < 2:
        return 0.0
    off = ~np.eye(p, dtype=bool)
    vals = np.abs(Theta[off])
    # DP-GLASSO zeros are exact after boundary thresholding
    nz = vals != 0 if engine == "dpglasso" else vals > NONZERO_TOL
    return float(np.mean(nz))


def _solve(engine, S, lam, opts):
    return ENGINES[engine](Instance(S, lam), opts)


def run_path(S, spec: PathSpec = PathSpec(), lambdas=None) -> PathResult:
    """Solve along :func:`lambda_grid` with the spec's engine and policy.

    ``lambdas`` overrides the grid with an explicit strictly decreasing
    sequence.

    Under the warm policy the previous ``(Theta, W)`` seeds the next
    lambda.  For GLASSO the dual feasibility of that seed is recorded and
    an infeasible seed only produces a warning.  A ``NonPdFailure`` is kept
    in ``fits`` and the same lambda is re-solved from a cold start, which
    then seeds the next lambda.
    """
    S = np.asarray(S, dtype=np.float64)
    if lambdas is None:
        lams = lambda_grid(S, spec)
    else:
        lams = np.asarray(lambdas, dtype=np.float64)
        if lams.ndim != 1 or lams.size == 0 or np.any(np.diff(lams) >= 0) or lams[-1] <= 0:
            raise ValueError("lambdas must be a nonempty, positive, strictly decreasing sequence")
    engine, opts = spec.engine, spec.opts
    if spec.policy is Policy.COLD:
        return _run_cold(S, lams, spec)

    fits, feas, walls, nzf = [], [], [], []
    fallbacks = {}
    prev = None
    for i, lam in enumerate(lams):
        if prev is None:
            run_opts = replace(opts, warm=None)
            ok = True
        else:
            run_opts = replace(opts, warm=WarmStart(W0=prev.W, Theta0=prev.Theta))
            if engine == "glasso":
                ok = warm_feasibility_check(prev.W, S, lam)
            else:
                ok = is_pd(prev.Theta)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", WarmStartInfeasible)
            try:
                res = _solve(engine, S, lam, run_opts)
            except NotPositiveDefinite:
                res = None
        if not ok:
            log.warning("lambda[%d]=%.6g: warm start is not dual feasible", i, lam)
        wall = 0
        if res is None or res.status is Status.NON_PD_FAILURE:
            log.warning("lambda[%d]=%.6g: warm start failed; retrying cold", i, lam)
            cold = _solve(engine, S, lam, replace(opts, warm=None))
            if res is None:
                res = cold
            else:
                fallbacks[i] = cold
                wall += res.solve_ns
            wall += cold.solve_ns
            prev = cold if cold.status is not Status.NON_PD_FAILURE else None
        else:
            wall += res.solve_ns
            prev = res
        fits.append(res)
        feas.append(ok)
        walls.append(wall)
        nzf.append(nonzero_fraction(res.Theta, engine))
    return PathResult(lams, fits, feas, walls, nzf, fallbacks)


def _run_cold(S, lams, spec):
    engine, opts = spec.engine, replace(spec.opts, warm=None)
    workers = _threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fits = list(pool.map(lambda lam: _solve(engine, S, lam, opts), lams))
    else:
        fits = [_solve(engine, S, lam, opts) for lam in lams]
    return PathResult(lams, fits, [True] * len(fits), [f.solve_ns for f in fits],
                      [nonzero_fraction(f.Theta, engine) for f in fits])


def _threads():
    try:
        return max(1, int(os.environ.get("PRECIS_THREADS", "1")))
    except ValueError:
        return 1


def path_rows(S, result: PathResult):
    """Yield one dict per lambda in the path summary CSV schema."""
    for lam, fit_, feas, wall, nz in zip(result.lambdas, result.fits, result.warm_feasible,
                                         result.wall_times, result.nonzero_fraction):
        try:
            g = dual_objective(fit_.W - S, S)
        except NotPositiveDefinite:
            g = math.nan
        try:
            kkt = kkt_residual(fit_.Theta, S, lam)
        except NotPositiveDefinite:
            kkt = math.nan
        yield {
            "lambda": lam, "status": fit_.status.value, "outer_sweeps": fit_.outer_sweeps,
            "total_inner_sweeps": fit_.total_inner_sweeps, "wall_ns": wall,
            "nonzero_frac": nz, "f_primal": fit_.f_primal, "g_dual": g,
            "kkt_residual": kkt, "warm_feasible": str(bool(feas)).lower(),
        }


def _cell(x):
    if isinstance(x, (bool, str)):
        return x if isinstance(x, str) else str(x).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def rows_to_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(row[h]) for h in header])
    return buf.getvalue()


def write_path_csv(path, S, result: PathResult):
    atomic_write_text(path, rows_to_csv(PATH_HEADER, path_rows(S, result)))


def diagonal_path(S, spec: PathSpec = PathSpec()):
    """Closed-form path for a diagonal ``S`` on the grid anchored at ``max(diag(S))``.

    With no off-diagonal signal ``lambda_max`` is zero, so the grid is
    built from the largest diagonal entry instead; every fit is
    ``Theta = diag(1 / (s_ii + lambda))``.
    """
    d = np.diag(S).astype(float)
    anchor = d.max() if d.max() > 0 else 1.0
    lams = spec.ratio ** np.arange(1, spec.K + 1) * spec.frac * anchor
    fits = []
    for lam in lams:
        w = d + lam
        t0 = time.perf_counter_ns()
        Theta, W = np.diag(1.0 / w), np.diag(w)
        ns = time.perf_counter_ns() - t0
        f = float(np.sum(np.log(w)) + len(w))
        fits.append(FitResult(spec.engine, float(lam), Theta, W, Status.CONVERGED, 0, 0,
                              solve_ns=ns, f_primal=f))
    return PathResult(lams, fits, [True] * len(fits), [f.solve_ns for f in fits],
                      [0.0] * len(fits))
