"""Dense symmetric-matrix kernels.

Matrices are plain ``float64`` numpy arrays with both triangles stored.
Block operations address a target column ``j`` by index arithmetic: the
"11" block is every row/column except ``j``, "12" is column ``j`` without
its diagonal entry and "22" is the diagonal entry itself.  Nothing is
physically permuted.

Column indices are 0-based throughout the Python API.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import DimensionTooSmall, MatrixFormatError, NotPositiveDefinite

# Relative pivot floor used to declare a factorization non-PD.
PIVOT_RTOL = 1e-12
# Symmetry tolerance applied when reading matrices from text.
LOAD_SYM_TOL = 1e-12


def as_symmetric(M, tol=None):
    """Return ``M`` as a float64 array with exactly equal triangles.

    If ``tol`` is given, raise ``ValueError`` when ``max |M - M'|``
    exceeds it; otherwise mirror-averaging is applied unconditionally.
    """
    M = np.array(M, dtype=np.float64, copy=True)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if M.shape[0] < 1:
        raise ValueError("matrix dimension must be >= 1")
    if tol is not None:
        asym = np.max(np.abs(M - M.T)) if M.size else 0.0
        if asym > tol:
            raise ValueError(f"matrix is not symmetric (max |M - M'| = {asym:.3g})")
    return 0.5 * (M + M.T)


def cholesky_pd(M):
    """Lower Cholesky factor of ``M``; raises ``NotPositiveDefinite``.

    A pivot ``L_ii**2`` at or below ``PIVOT_RTOL * max(diag(M))`` counts as
    a failure, as does any diagonal entry of ``M`` that is not positive.
    """
    M = np.asarray(M, dtype=np.float64)
    d = np.diag(M)
    scale = np.max(d) if d.size else 0.0
    if not np.all(np.isfinite(M)) or scale <= 0:
        raise NotPositiveDefinite("matrix has a non-positive or non-finite diagonal")
    try:
        L = scipy.linalg.cholesky(M, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    pivots = np.diag(L) ** 2
    if np.min(pivots) <= PIVOT_RTOL * scale:
        raise NotPositiveDefinite(
            f"Cholesky pivot {np.min(pivots):.3g} below {PIVOT_RTOL:g} x max diagonal"
        )
    return L


def is_pd(M):
    try:
        cholesky_pd(M)
    except NotPositiveDefinite:
        return False
    return True


def logdet_pd(M):
    """Log-determinant of a PD matrix via its Cholesky factor."""
    L = cholesky_pd(M)
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def inv_pd(M):
    """Inverse of a PD matrix, returned exactly symmetric."""
    L = cholesky_pd(M)
    Linv = scipy.linalg.solve_triangular(L, np.eye(L.shape[0]), lower=True,
                                         check_finite=False)
    return Linv.T @ Linv


def min_eigenvalue(M):
    return float(scipy.linalg.eigvalsh(M, subset_by_index=[0, 0],
                                       check_finite=False)[0])


def others(p, j):
    """Indices of the "11" block for target column ``j``."""
    return np.concatenate((np.arange(j), np.arange(j + 1, p)))


def _check_column(p, j):
    if not 0 <= j < p:
        raise IndexError(f"column index {j} out of range for p={p}")


def schur_downdate(W, j):
    """Return ``W11 - w12 w21 / w22`` for target column ``j``.

    When ``W`` is the inverse of a precision matrix ``Theta`` this is
    exactly ``inv(Theta11)``, the quadratic form of the primal block
    lasso.  Cost is O(p^2).
    """
    W = np.asarray(W, dtype=np.float64)
    p = W.shape[0]
    _check_column(p, j)
    w22 = W[j, j]
    if not w22 > 0:
        raise NotPositiveDefinite(f"diagonal entry w[{j},{j}] = {w22:.3g} is not positive")
    idx = others(p, j)
    w12 = W[idx, j]
    out = W[np.ix_(idx, idx)] - np.outer(w12, w12) / w22
    return 0.5 * (out + out.T)


def block_reassemble(Theta11inv, theta12, theta22, j):
    """Rebuild ``W = inv(Theta)`` from the blocks of ``Theta`` at column ``j``.

    Parameters
    ----------
    Theta11inv : (p-1, p-1) array
        Inverse of the "11" block of ``Theta``.
    theta12 : (p-1,) array
        Off-diagonal part of column ``j`` of ``Theta``.
    theta22 : float
        Diagonal entry ``Theta[j, j]``.
    j : int
        Target column in the assembled p x p matrix.

    Returns
    -------
    W : (p, p) array
        ``w22 = 1 / (theta22 - theta21 M theta12)``,
        ``w12 = -M theta12 w22`` and ``W11 = M + M theta12 theta21 M w22``
        with ``M = Theta11inv``.
    """
    M = np.asarray(Theta11inv, dtype=np.float64)
    theta12 = np.asarray(theta12, dtype=np.float64)
    q = M.shape[0]
    p = q + 1
    _check_column(p, j)
    Mt = M @ theta12
    schur = theta22 - theta12 @ Mt
    if not schur > 0:
        raise NotPositiveDefinite(f"Schur complement {schur:.3g} at column {j} is not positive")
    w22 = 1.0 / schur
    W = np.empty((p, p))
    idx = others(p, j)
    W11 = M + np.outer(Mt, Mt) * w22
    W[np.ix_(idx, idx)] = 0.5 * (W11 + W11.T)
    W[idx, j] = -Mt * w22
    W[j, idx] = W[idx, j]
    W[j, j] = w22
    return W


def max_abs_offdiag(M):
    M = np.asarray(M)
    p = M.shape[0]
    if p < 2:
        raise DimensionTooSmall("need p >= 2 for an off-diagonal maximum")
    A = np.abs(M)
    np.fill_diagonal(A, 0.0)
    return float(A.max())


# --- text format -----------------------------------------------------------

def format_matrix(M):
    M = np.asarray(M, dtype=np.float64)
    lines = [str(M.shape[0])]
    lines.extend(" ".join(f"{x:.17g}" for x in row) for row in M)
    return "\n".join(lines) + "\n"


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_matrix(path, M):
    atomic_write_text(path, format_matrix(M))


def read_matrix(path):
    """Read a symmetric matrix in the shared text format.

    The first non-blank line holds ``p``; the next ``p`` lines hold the rows.
    Symmetry is checked to ``LOAD_SYM_TOL`` and then enforced by averaging.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise MatrixFormatError(path, 0, f"cannot read file ({exc.strerror})") from None
    lines = [(n, ln) for n, ln in enumerate(text.splitlines(), start=1) if ln.strip()]
    if not lines:
        raise MatrixFormatError(path, 1, "empty file")
    n0, head = lines[0]
    try:
        p = int(head.strip())
    except ValueError:
        raise MatrixFormatError(path, n0, f"expected dimension, got {head.strip()!r}") from None
    if p < 1:
        raise MatrixFormatError(path, n0, f"dimension must be positive, got {p}")
    if len(lines) - 1 != p:
        last = lines[-1][0]
        raise MatrixFormatError(path, last, f"expected {p} rows, found {len(lines) - 1}")
    M = np.empty((p, p))
    for i, (n, ln) in enumerate(lines[1:]):
        fields = ln.split()
        if len(fields) != p:
            raise MatrixFormatError(path, n, f"expected {p} values, found {len(fields)}")
        try:
            M[i] = [float(x) for x in fields]
        except ValueError as exc:
            raise MatrixFormatError(path, n, str(exc)) from None
    if not np.all(np.isfinite(M)):
        raise MatrixFormatError(path, n0, "non-finite entry")
    asym = np.abs(M - M.T)
    if np.max(asym) > LOAD_SYM_TOL:
        i, _ = np.unravel_index(np.argmax(asym), asym.shape)
        raise MatrixFormatError(path, lines[1 + i][0],
                                f"matrix is not symmetric (|m_ij - m_ji| = {np.max(asym):.3g})")
    return 0.5 * (M + M.T)
