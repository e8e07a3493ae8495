"""Compiled single-column updates used by the engines.

Each kernel performs one row/column update in place and returns
``(inner_sweeps, inner_converged, ok)``.  ``ok`` is False when the
update lost positive definiteness; the matrices then hold the state
right after the offending update.
"""

import numba
import numpy as np

from .qpcore import _cd_box, _cd_l1


@numba.njit(cache=True, nogil=True)
def _others(p, j):
    idx = np.empty(p - 1, dtype=np.int64)
    k = 0
    for i in range(p):
        if i != j:
            idx[k] = i
            k += 1
    return idx


@numba.njit(cache=True, nogil=True)
def _sub(M, idx):
    q = idx.shape[0]
    out = np.empty((q, q))
    for a in range(q):
        ra = idx[a]
        for b in range(q):
            out[a, b] = M[ra, idx[b]]
    return out


@numba.njit(cache=True, nogil=True)
def _write_col(M, idx, j, col, diag):
    for a in range(idx.shape[0]):
        M[idx[a], j] = col[a]
        M[j, idx[a]] = col[a]
    M[j, j] = diag


@numba.njit(cache=True, nogil=True)
def glasso_column(W, B, Theta, S, lam, j, pivot_rtol, tol, max_sweeps, skip):
    p = W.shape[0]
    idx = _others(p, j)
    q = p - 1
    W11 = _sub(W, idx)
    a = np.empty(q)
    beta = np.empty(q)
    for k in range(q):
        a[k] = S[idx[k], j]
        beta[k] = B[idx[k], j]
    sweeps, conv = _cd_l1(W11, a, lam, beta, tol, max_sweeps, skip)
    w12 = -(W11 @ beta)
    w22 = S[j, j] + lam
    _write_col(W, idx, j, w12, w22)
    for k in range(q):
        B[idx[k], j] = beta[k]
    schur = w22 + beta @ w12
    if not schur > pivot_rtol * w22:
        return sweeps, conv, False
    theta22 = 1.0 / schur
    _write_col(Theta, idx, j, beta * theta22, theta22)
    return sweeps, conv, True


@numba.njit(cache=True, nogil=True)
def pglasso_column(W, Theta, S, lam, j, tol, max_sweeps, skip):
    p = W.shape[0]
    idx = _others(p, j)
    q = p - 1
    # M = inv(Theta11) by downdating W
    v22 = W[j, j]
    M = np.empty((q, q))
    for r in range(q):
        wr = W[idx[r], j]
        for c in range(r, q):
            val = W[idx[r], idx[c]] - wr * W[idx[c], j] / v22
            M[r, c] = val
            M[c, r] = val
    a = np.empty(q)
    w22 = S[j, j] + lam
    u = np.empty(q)
    for k in range(q):
        a[k] = S[idx[k], j]
        u[k] = Theta[idx[k], j] * w22
    sweeps, conv = _cd_l1(M, a, lam, u, tol, max_sweeps, skip)
    theta12 = u / w22
    Mt = M @ theta12
    theta22 = 1.0 / w22 + theta12 @ Mt
    schur = theta22 - theta12 @ Mt
    if not schur > 0:
        return sweeps, conv, False
    wnew = 1.0 / schur
    for r in range(q):
        for c in range(r, q):
            val = M[r, c] + Mt[r] * Mt[c] * wnew
            W[idx[r], idx[c]] = val
            W[idx[c], idx[r]] = val
    _write_col(W, idx, j, -Mt * wnew, wnew)
    _write_col(Theta, idx, j, theta12, theta22)
    return sweeps, conv, True


@numba.njit(cache=True, nogil=True)
def dpglasso_column(W, Theta, S, lam, j, cut, tol, max_sweeps, skip):
    p = W.shape[0]
    idx = _others(p, j)
    q = p - 1
    T11 = _sub(Theta, idx)
    b = np.empty(q)
    gamma = np.empty(q)
    for k in range(q):
        b[k] = S[idx[k], j]
        gamma[k] = min(max(W[idx[k], j] - b[k], -lam), lam)
    sweeps, conv = _cd_box(T11, b, lam, gamma, tol, max_sweeps, skip)
    w12 = b + gamma
    w22 = S[j, j] + lam
    theta12 = -(T11 @ w12) / w22
    theta22 = (1.0 - w12 @ theta12) / w22
    # inv(T11) theta12 = -w12 / w22 for the unthresholded column
    if not theta22 + (w12 @ theta12) / w22 > 0:
        return sweeps, conv, False
    # interior dual coordinates certify a zero primal entry
    for k in range(q):
        if abs(gamma[k]) < cut:
            theta12[k] = 0.0
    _write_col(Theta, idx, j, theta12, theta22)
    _write_col(W, idx, j, w12, w22)
    return sweeps, conv, True
