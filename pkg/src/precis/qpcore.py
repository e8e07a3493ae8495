"""Cyclic coordinate descent for the two block subproblems.

``solve_l1_qp`` handles

    minimize  0.5 u'Au + a'u + lam ||u||_1

and ``solve_box_qp`` handles

    minimize  0.5 (v + b)' A (v + b)   subject to  ||v||_inf <= lam.

Both keep a running gradient that is patched with one column of the
matrix per accepted move.  With ``skip=True`` they alternate full sweeps
with sweeps restricted to the "active" coordinates: nonzeros for the
l1 problem, interior coordinates for the box problem.  A coordinate
sitting at zero (resp. on the box boundary) is revisited only on the next
full sweep.  Convergence is declared on a full sweep whose largest
coordinate move is at most ``tol_inner * (1 + max |x|)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numba
import numpy as np

from .errors import NotPositiveDefinite


@dataclass(frozen=True)
class InnerOptions:
    tol_inner: float = 1e-7
    max_sweeps: int = 10000
    warm: Optional[np.ndarray] = None
    skip: bool = True

    def __post_init__(self):
        if not self.tol_inner > 0:
            raise ValueError("tol_inner must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")


@dataclass(frozen=True)
class L1QpProblem:
    A: np.ndarray
    a: np.ndarray
    lam: float


@dataclass(frozen=True)
class BoxQpProblem:
    Atil: np.ndarray
    b: np.ndarray
    lam: float


class InnerResult(NamedTuple):
    x: np.ndarray
    sweeps: int
    converged: bool


def soft_threshold(x, t):
    return np.sign(x) * max(abs(x) - t, 0.0)


@numba.njit(cache=True, nogil=True)
def _l1_pass(A, lam, u, g, coords):
    # One pass over `coords`; returns the largest |move|.
    dmax = 0.0
    for j in coords:
        ajj = A[j, j]
        r = g[j] - ajj * u[j]
        z = -r
        if z > lam:
            new = (z - lam) / ajj
        elif z < -lam:
            new = (z + lam) / ajj
        else:
            new = 0.0
        d = new - u[j]
        if d != 0.0:
            u[j] = new
            for k in range(g.shape[0]):
                g[k] += d * A[j, k]
            if abs(d) > dmax:
                dmax = abs(d)
    return dmax


@numba.njit(cache=True, nogil=True)
def _cd_l1(A, a, lam, u, tol, max_sweeps, skip):
    q = a.shape[0]
    g = A @ u + a
    full = np.arange(q)
    sweeps = 0
    while sweeps < max_sweeps:
        dmax = _l1_pass(A, lam, u, g, full)
        sweeps += 1
        if dmax <= tol * (1.0 + np.max(np.abs(u))):
            return sweeps, True
        if skip:
            while sweeps < max_sweeps:
                active = np.nonzero(u)[0]
                if active.shape[0] == 0:
                    break
                dmax = _l1_pass(A, lam, u, g, active)
                sweeps += 1
                if dmax <= tol * (1.0 + np.max(np.abs(u))):
                    break
    return sweeps, False


@numba.njit(cache=True, nogil=True)
def _box_pass(A, lam, v, g, coords):
    dmax = 0.0
    for j in coords:
        ajj = A[j, j]
        new = v[j] - g[j] / ajj
        if new > lam:
            new = lam
        elif new < -lam:
            new = -lam
        d = new - v[j]
        if d != 0.0:
            v[j] = new
            for k in range(g.shape[0]):
                g[k] += d * A[j, k]
            if abs(d) > dmax:
                dmax = abs(d)
    return dmax


@numba.njit(cache=True, nogil=True)
def _cd_box(A, b, lam, v, tol, max_sweeps, skip):
    q = b.shape[0]
    g = A @ (v + b)
    full = np.arange(q)
    sweeps = 0
    while sweeps < max_sweeps:
        dmax = _box_pass(A, lam, v, g, full)
        sweeps += 1
        if dmax <= tol * (1.0 + np.max(np.abs(v))):
            return sweeps, True
        if skip:
            while sweeps < max_sweeps:
                # |v_j| == lam counts as boundary
                interior = np.nonzero(np.abs(v) < lam)[0]
                if interior.shape[0] == 0:
                    break
                dmax = _box_pass(A, lam, v, g, interior)
                sweeps += 1
                if dmax <= tol * (1.0 + np.max(np.abs(v))):
                    break
    return sweeps, False


def _prepare(M, vec, lam, warm):
    M = np.ascontiguousarray(M, dtype=np.float64)
    vec = np.ascontiguousarray(vec, dtype=np.float64)
    q = vec.shape[0]
    if M.shape != (q, q):
        raise ValueError(f"matrix shape {M.shape} does not match vector length {q}")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if q and np.min(np.diag(M)) <= 0:
        raise NotPositiveDefinite("quadratic form has a non-positive diagonal entry")
    if warm is None:
        x = np.zeros(q)
    else:
        x = np.array(warm, dtype=np.float64)
        if x.shape != (q,):
            raise ValueError(f"warm start has shape {x.shape}, expected ({q},)")
    return M, vec, x


def solve_l1_qp(prob: L1QpProblem, opts: InnerOptions = InnerOptions()) -> InnerResult:
    """Coordinate descent for the l1-penalized QP.

    Each update is ``u_j <- S(-a_j - sum_{k != j} A_jk u_k, lam) / A_jj``
    with ``S`` the soft-threshold.  Returns the iterate reached and a
    ``converged`` flag that is False if ``max_sweeps`` ran out.
    """
    A, a, u = _prepare(prob.A, prob.a, prob.lam, opts.warm)
    if a.shape[0] == 0:
        return InnerResult(u, 0, True)
    sweeps, ok = _cd_l1(A, a, float(prob.lam), u, float(opts.tol_inner),
                        int(opts.max_sweeps), bool(opts.skip))
    return InnerResult(u, int(sweeps), bool(ok))


def solve_box_qp(prob: BoxQpProblem, opts: InnerOptions = InnerOptions()) -> InnerResult:
    """Coordinate descent for the box-constrained QP.

    Each update is ``v_j <- clip(-b_j - sum_{k != j} A_jk (v_k + b_k) / A_jj)``
    onto ``[-lam, lam]``.  A warm start is clipped into the box first.
    """
    A, b, v = _prepare(prob.Atil, prob.b, prob.lam, opts.warm)
    lam = float(prob.lam)
    np.clip(v, -lam, lam, out=v)
    if b.shape[0] == 0:
        return InnerResult(v, 0, True)
    sweeps, ok = _cd_box(A, b, lam, v, float(opts.tol_inner),
                         int(opts.max_sweeps), bool(opts.skip))
    return InnerResult(v, int(sweeps), bool(ok))


def l1_qp_objective(prob: L1QpProblem, u):
    u = np.asarray(u)
    return float(0.5 * u @ prob.A @ u + prob.a @ u + prob.lam * np.sum(np.abs(u)))


def box_qp_objective(prob: BoxQpProblem, v):
    r = np.asarray(v) + prob.b
    return float(0.5 * r @ prob.Atil @ r)


def l1_qp_kkt_violation(prob: L1QpProblem, u):
    """Largest violation of the subgradient conditions at ``u``."""
    u = np.asarray(u)
    g = prob.A @ u + prob.a
    nz = u != 0
    viol = np.where(nz, np.abs(g + prob.lam * np.sign(u)),
                    np.maximum(np.abs(g) - prob.lam, 0.0))
    return float(viol.max()) if viol.size else 0.0


def box_qp_kkt_violation(prob: BoxQpProblem, v):
    """Largest projected-gradient violation at ``v`` (assumed box-feasible)."""
    v = np.asarray(v)
    g = prob.Atil @ (v + prob.b)
    lam = prob.lam
    upper = v >= lam
    lower = v <= -lam
    viol = np.abs(g)
    # on the upper bound the gradient may be <= 0, on the lower bound >= 0
    viol = np.where(upper, np.maximum(g, 0.0), viol)
    viol = np.where(lower, np.maximum(-g, 0.0), viol)
    viol = np.where(upper & lower, 0.0, viol)
    return float(viol.max()) if viol.size else 0.0
