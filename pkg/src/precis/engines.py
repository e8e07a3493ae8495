"""Block-coordinate engines for the graphical lasso.

Three outer algorithms share one driver that cycles over columns
``0..p-1`` until an outer criterion holds:

* :func:`glasso_fit` -- row/column ascent on the covariance ``W``; each
  block is an l1-QP in ``beta = theta12 / theta22`` with quadratic form
  ``W11``.
* :func:`pglasso_fit` -- row/column descent on ``Theta`` keeping
  ``W = inv(Theta)`` exact through rank-one block updates; each block is
  an l1-QP in ``alpha = theta12 * w22`` with quadratic form ``inv(Theta11)``.
* :func:`dpglasso_fit` -- row/column descent on ``Theta``; each block is a
  box-QP with quadratic form ``Theta11`` whose solution maps back to the
  primal column.

All three minimize ``-logdet(Theta) + tr(S Theta) + lam ||Theta||_1``.
"""

from __future__ import annotations

import enum
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import _fused
from .diagnostics import TraceRecord, primal_objective, snapshot
from .errors import NotPositiveDefinite, WarmStartInfeasible
from .qpcore import InnerOptions
from .symmat import PIVOT_RTOL, as_symmetric, cholesky_pd, inv_pd, is_pd, min_eigenvalue, others

__all__ = [
    "Criterion", "Status", "Instance", "WarmStart", "SolverOptions", "FitResult",
    "glasso_fit", "pglasso_fit", "dpglasso_fit", "fit", "ENGINES",
]


class Criterion(str, enum.Enum):
    PRIMAL_OBJECTIVE = "primal_objective"
    MATRIX_CHANGE = "matrix_change"


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_SWEEPS = "MaxSweeps"
    NON_PD_FAILURE = "NonPdFailure"


@dataclass(frozen=True)
class Instance:
    S: np.ndarray
    lam: float

    def __post_init__(self):
        S = as_symmetric(self.S, tol=1e-8)
        if np.any(np.diag(S) < 0):
            raise ValueError("S must have a nonnegative diagonal")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def p(self):
        return self.S.shape[0]


@dataclass(frozen=True)
class WarmStart:
    W0: Optional[np.ndarray] = None
    Theta0: Optional[np.ndarray] = None


@dataclass(frozen=True)
class SolverOptions:
    tol_outer: float = 1e-4
    criterion: Criterion = Criterion.PRIMAL_OBJECTIVE
    max_outer_sweeps: int = 1000
    # 1e-10 keeps GLASSO's dual iterates inside the box to ~1e-10
    inner: InnerOptions = InnerOptions(tol_inner=1e-10)
    warm: Optional[WarmStart] = None
    boundary_eps: float = 1e-8
    emit_trace: bool = False

    def __post_init__(self):
        if not self.tol_outer > 0:
            raise ValueError("tol_outer must be positive")
        if self.max_outer_sweeps < 1:
            raise ValueError("max_outer_sweeps must be >= 1")
        object.__setattr__(self, "criterion", Criterion(self.criterion))


@dataclass
class FitResult:
    """Outcome of one engine run.

    ``solve_ns`` covers the row/column updates only.  ``objective_ns`` is
    the time spent evaluating the outer criterion, including GLASSO's
    direct inversion of ``W``.  On ``NonPdFailure`` the matrices are the
    state right after the offending update, and ``failed_column`` /
    ``failed_min_eig`` describe it.
    """

    engine: str
    lam: float
    Theta: np.ndarray
    W: np.ndarray
    status: Status
    outer_sweeps: int
    total_inner_sweeps: int
    trace: List[TraceRecord] = field(default_factory=list)
    solve_ns: int = 0
    objective_ns: int = 0
    f_primal: float = math.nan
    inner_unconverged: int = 0
    failed_column: Optional[int] = None
    failed_min_eig: Optional[float] = None

    @property
    def converged(self):
        return self.status is Status.CONVERGED


class _NonPd(Exception):
    def __init__(self, column):
        self.column = column


class _State:
    name = ""

    def __init__(self, inst: Instance, opts: SolverOptions):
        self.S = inst.S
        self.lam = inst.lam
        self.p = inst.p
        self.opts = opts
        self.inner_sweeps = 0
        self.inner_unconverged = 0

        inner = opts.inner
        self._inner = (float(inner.tol_inner), int(inner.max_sweeps), bool(inner.skip))

    def _count(self, sweeps, converged):
        self.inner_sweeps += int(sweeps)
        if not converged:
            self.inner_unconverged += 1

    def objective_theta(self):
        return self.Theta

    def watched(self):
        return self.Theta

    def record(self, sweep, j, elapsed):
        return snapshot(sweep, j, self.Theta, self.W, self.S, self.lam, elapsed)

    def finish(self):
        return self.Theta, self.W


class _Glasso(_State):
    name = "glasso"

    def __init__(self, inst, opts):
        super().__init__(inst, opts)
        p, S, lam = self.p, self.S, self.lam
        warm = opts.warm or WarmStart()
        if warm.W0 is not None:
            W = as_symmetric(warm.W0, tol=1e-8)
            if np.max(np.abs(W - S)) > lam + 1e-12:
                warnings.warn(
                    f"GLASSO warm start violates ||W0 - S||_inf <= lambda "
                    f"({np.max(np.abs(W - S)):.4g} > {lam:.4g}); positive "
                    "definiteness of W is not guaranteed", WarmStartInfeasible,
                    stacklevel=4)
        else:
            W = S + lam * np.eye(p)
        self.W = W
        # column j of B holds beta_j on the off-diagonal rows
        self.B = np.zeros((p, p))
        if warm.Theta0 is not None:
            T0 = as_symmetric(warm.Theta0, tol=1e-8)
            d = np.diag(T0)
            if np.any(d <= 0):
                raise NotPositiveDefinite("warm Theta0 has a non-positive diagonal")
            self.B = T0 / d[None, :]
            np.fill_diagonal(self.B, 0.0)
            self.Theta = T0.copy()
        else:
            self.Theta = np.diag(1.0 / np.diag(W))

    def check_start(self):
        if not is_pd(self.W):
            raise _NonPd(None)

    def update(self, j):
        sweeps, conv, ok = _fused.glasso_column(self.W, self.B, self.Theta, self.S, self.lam,
                                                j, PIVOT_RTOL, *self._inner)
        self._count(sweeps, conv)
        # the Schur complement of W at j is 1/theta22; W11 is PD by induction
        if not ok:
            raise _NonPd(j)

    def objective_theta(self):
        return inv_pd(self.W)

    def watched(self):
        return self.W

    def record(self, sweep, j, elapsed):
        try:
            f_theta = inv_pd(self.W)
        except NotPositiveDefinite:
            f_theta = np.full_like(self.W, np.nan)
        return snapshot(sweep, j, self.Theta, self.W, self.S, self.lam, elapsed,
                        f_theta=f_theta)

    def finish(self):
        W, B, p = self.W, self.B, self.p
        Theta = np.empty((p, p))
        for j in range(p):
            idx = others(p, j)
            theta22 = 1.0 / (W[j, j] + B[idx, j] @ W[idx, j])
            Theta[idx, j] = B[idx, j] * theta22
            Theta[j, j] = theta22
        return 0.5 * (Theta + Theta.T), W


def _primal_warm(inst, opts):
    warm = opts.warm or WarmStart()
    if warm.Theta0 is None:
        d = np.diag(inst.S) + inst.lam
        return np.diag(1.0 / d), np.diag(d), warm
    Theta = as_symmetric(warm.Theta0, tol=1e-8)
    cholesky_pd(Theta)  # raises NotPositiveDefinite on an invalid warm start
    return Theta, None, warm


class _Pglasso(_State):
    name = "pglasso"

    def __init__(self, inst, opts):
        super().__init__(inst, opts)
        self.Theta, W, _ = _primal_warm(inst, opts)
        self.W = W if W is not None else inv_pd(self.Theta)

    def check_start(self):
        pass

    def update(self, j):
        # block solve on inv(Theta11) = W11 - w12 w21 / w22, then W rebuilt by rank one
        sweeps, conv, ok = _fused.pglasso_column(self.W, self.Theta, self.S, self.lam, j,
                                                 *self._inner)
        self._count(sweeps, conv)
        if not ok:
            raise NotPositiveDefinite(f"Schur complement lost positivity at column {j}")


class _Dpglasso(_State):
    name = "dpglasso"

    def __init__(self, inst, opts):
        super().__init__(inst, opts)
        self.Theta, W, warm = _primal_warm(inst, opts)
        if W is None:
            W = (as_symmetric(warm.W0, tol=1e-8) if warm.W0 is not None
                 else inv_pd(self.Theta))
        self.W = W
        self.cut = self.lam * (1.0 - opts.boundary_eps)

    def check_start(self):
        pass

    def update(self, j):
        # box-QP on Theta11 warm-started at clip(w12 - s12); zeros where the dual is interior
        sweeps, conv, ok = _fused.dpglasso_column(self.W, self.Theta, self.S, self.lam, j,
                                                  self.cut, *self._inner)
        self._count(sweeps, conv)
        if not ok:
            raise NotPositiveDefinite(f"Schur complement lost positivity at column {j}")


def _run(state: _State, opts: SolverOptions) -> FitResult:
    S, lam, p = state.S, state.lam, state.p
    trace = []
    solve_ns = 0
    objective_ns = 0

    def objective():
        nonlocal objective_ns
        t = time.perf_counter_ns()
        f = primal_objective(state.objective_theta(), S, lam)
        objective_ns += time.perf_counter_ns() - t
        return f

    def failure(column, sweeps):
        Theta, W = state.Theta, state.W
        return FitResult(state.name, lam, Theta.copy(), W.copy(), Status.NON_PD_FAILURE,
                         sweeps, state.inner_sweeps, trace, solve_ns, objective_ns,
                         math.nan, state.inner_unconverged, column, min_eigenvalue(W))

    for name in ("W", "Theta", "B"):
        if hasattr(state, name):
            setattr(state, name, np.array(getattr(state, name), dtype=np.float64, order="C"))
    try:
        state.check_start()
    except _NonPd:
        return failure(None, 0)

    use_obj = opts.criterion is Criterion.PRIMAL_OBJECTIVE
    f_prev = objective() if use_obj else math.nan
    status = Status.MAX_SWEEPS
    sweep = 0
    for sweep in range(1, opts.max_outer_sweeps + 1):
        prev = None if use_obj else state.watched().copy()
        for j in range(p):
            t = time.perf_counter_ns()
            try:
                state.update(j)
            except _NonPd as exc:
                solve_ns += time.perf_counter_ns() - t
                if opts.emit_trace:
                    trace.append(state.record(sweep, j, solve_ns))
                return failure(exc.column, sweep)
            solve_ns += time.perf_counter_ns() - t
            if opts.emit_trace:
                trace.append(state.record(sweep, j, solve_ns))
        if use_obj:
            f = objective()
            change = abs(f - f_prev) / max(abs(f_prev), np.finfo(float).tiny)
            f_prev = f
        else:
            cur = state.watched()
            change = np.max(np.abs(cur - prev)) / (1.0 + np.max(np.abs(cur)))
        if change <= opts.tol_outer:
            status = Status.CONVERGED
            break

    Theta, W = state.finish()
    t = time.perf_counter_ns()
    f_final = primal_objective(Theta, S, lam) if is_pd(Theta) else math.nan
    objective_ns += time.perf_counter_ns() - t
    return FitResult(state.name, lam, Theta, W, status, sweep, state.inner_sweeps, trace,
                     solve_ns, objective_ns, f_final, state.inner_unconverged)


def glasso_fit(inst: Instance, opts: SolverOptions = SolverOptions()) -> FitResult:
    """Graphical lasso by block ascent on the covariance.

    Starts from ``W = S + lam I`` unless ``opts.warm.W0`` is given.  A warm
    ``W0`` outside the dual box triggers :class:`WarmStartInfeasible`; a
    row/column update that destroys positive definiteness of ``W`` ends
    the run with ``Status.NON_PD_FAILURE``.  ``Theta`` is assembled from
    the stored ``beta`` columns after the last sweep.
    """
    return _run(_Glasso(inst, opts), opts)


def pglasso_fit(inst: Instance, opts: SolverOptions = SolverOptions()) -> FitResult:
    """Primal block descent keeping ``Theta @ W == I`` after every update.

    Any positive definite ``opts.warm.Theta0`` is a valid start; a
    non-PD one raises :class:`NotPositiveDefinite`.
    """
    return _run(_Pglasso(inst, opts), opts)


def dpglasso_fit(inst: Instance, opts: SolverOptions = SolverOptions()) -> FitResult:
    """Primal block descent through box-QP duals of the column lasso.

    The cold start is ``Theta = diag(1 / (s_ii + lam))`` with its exact
    inverse as working covariance.  A warm start needs a PD ``Theta0``;
    the working covariance comes from ``W0`` if supplied, else from
    ``inv(Theta0)``.  Off-diagonal entries whose dual coordinate is more
    than ``boundary_eps * lam`` inside the box are set exactly to zero.
    """
    return _run(_Dpglasso(inst, opts), opts)


ENGINES = {"glasso": glasso_fit, "pglasso": pglasso_fit, "dpglasso": dpglasso_fit}


def fit(engine: str, inst: Instance, opts: SolverOptions = SolverOptions()) -> FitResult:
    try:
        fn = ENGINES[engine]
    except KeyError:
        raise ValueError(f"unknown engine {engine!r}; choose from {sorted(ENGINES)}") from None
    return fn(inst, opts)
