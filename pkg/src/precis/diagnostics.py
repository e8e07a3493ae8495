"""Objective values, KKT residuals, duality gaps and per-update traces."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .errors import NotPositiveDefinite
from .symmat import atomic_write_text, inv_pd, logdet_pd, min_eigenvalue

DUAL_FEAS_TOL = 1e-10

TRACE_HEADER = ("sweep", "column", "f_primal", "g_dual", "min_eig_theta",
                "min_eig_w", "inv_mismatch", "elapsed_ns")


@dataclass(frozen=True)
class TraceRecord:
    """Snapshot taken right after one row/column update.

    ``inv_mismatch`` is ``||Theta - inv(W)||_F^2``.  Fields that are
    undefined at the snapshot (e.g. a log-determinant of an indefinite
    matrix) hold NaN.
    """

    sweep: int
    column: int
    f_primal: float
    g_dual: float
    min_eig_theta: float
    min_eig_w: float
    inv_mismatch: float
    elapsed_ns: int


@dataclass(frozen=True)
class DualCertificate:
    GammaTilde: np.ndarray
    feasible: bool


def primal_objective(Theta, S, lam):
    """``-logdet(Theta) + tr(S Theta) + lam * sum |theta_ij|`` (diagonal included)."""
    Theta = np.asarray(Theta)
    return -logdet_pd(Theta) + float(np.sum(S * Theta)) + lam * float(np.sum(np.abs(Theta)))


def dual_objective(GammaTilde, S):
    """``logdet(S + GammaTilde) + p``."""
    S = np.asarray(S)
    return logdet_pd(S + GammaTilde) + S.shape[0]


def dual_certificate(W, S, lam):
    G = np.asarray(W) - np.asarray(S)
    return DualCertificate(G, bool(np.max(np.abs(G)) <= lam + DUAL_FEAS_TOL))


def kkt_residual(Theta, S, lam):
    """Largest violation of ``-inv(Theta) + S + lam * Gamma = 0``.

    ``W`` is recomputed as ``inv(Theta)``.  Entries with ``theta_ij != 0``
    contribute ``|s_ij - w_ij + lam sign(theta_ij)|``; exact zeros
    contribute ``max(0, |s_ij - w_ij| - lam)``.
    """
    Theta = np.asarray(Theta)
    W = inv_pd(Theta)
    R = np.asarray(S) - W
    viol = np.where(Theta != 0, np.abs(R + lam * np.sign(Theta)),
                    np.maximum(np.abs(R) - lam, 0.0))
    return float(viol.max())


def duality_gap(Theta, W, S, lam):
    """``f(Theta) - g(W - S)``; ``+inf`` if ``W - S`` leaves the box."""
    cert = dual_certificate(W, S, lam)
    if not cert.feasible:
        return math.inf
    return primal_objective(Theta, S, lam) - dual_objective(cert.GammaTilde, S)


def _safe(fn, *args):
    try:
        return fn(*args)
    except NotPositiveDefinite:
        return math.nan


def snapshot(sweep, column, Theta, W, S, lam, elapsed_ns, f_theta=None):
    """Build a :class:`TraceRecord` for the current engine state.

    ``f_theta`` is the matrix at which the primal objective is evaluated;
    it defaults to ``Theta``.  GLASSO passes ``inv(W)`` here because its
    working ``Theta`` need not be positive definite.
    """
    if f_theta is None:
        f_theta = Theta
    f = _safe(primal_objective, f_theta, S, lam)
    g = _safe(dual_objective, W - S, S)
    try:
        mismatch = float(np.sum((Theta - np.linalg.inv(W)) ** 2))
    except np.linalg.LinAlgError:
        mismatch = math.nan
    return TraceRecord(int(sweep), int(column), f, g, min_eigenvalue(Theta),
                       min_eigenvalue(W), mismatch, int(elapsed_ns))


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{x:.17g}"


def trace_to_csv(records):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for r in records:
        w.writerow([_fmt(x) for x in astuple(r)])
    return buf.getvalue()


def write_trace_csv(path, records):
    atomic_write_text(path, trace_to_csv(records))


def read_trace_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        kw = {}
        for f in fields(TraceRecord):
            kw[f.name] = int(row[f.name]) if f.type in ("int", int) else float(row[f.name])
        out.append(TraceRecord(**kw))
    return out


def is_monotone(values, direction, rel_slack=1e-10):
    """True if ``values`` never moves against ``direction`` by more than slack.

    ``direction`` is ``"up"`` (nondecreasing) or ``"down"``.  NaNs fail.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return bool(np.all(np.isfinite(v)))
    if not np.all(np.isfinite(v)):
        return False
    d = np.diff(v)
    slack = rel_slack * np.abs(v[:-1])
    if direction == "up":
        return bool(np.all(d >= -slack))
    if direction == "down":
        return bool(np.all(d <= slack))
    raise ValueError(f"direction must be 'up' or 'down', got {direction!r}")
