"""Synthetic instances and fixed fixtures.

Randomness comes from numpy's Philox-4x64 counter-based bit generator
keyed by the integer seed, so every generator here is a deterministic
function of its arguments on every platform numpy supports.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .symmat import cholesky_pd, inv_pd, min_eigenvalue


class Kind(str, enum.Enum):
    TYPE1 = "type1"
    TYPE2 = "type2"
    APPENDIX_NOISE = "appnoise"


@dataclass(frozen=True)
class GeneratorSpec:
    kind: Kind
    p: int
    zero_frac: float = 0.77
    tau: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.p < 2:
            raise ValueError("p must be >= 2")
        if not 0 <= self.zero_frac < 1:
            raise ValueError("zero_frac must lie in [0, 1)")
        if not self.tau > 0:
            raise ValueError("tau must be positive")


@dataclass(frozen=True)
class Dataset:
    Theta_true: np.ndarray
    S: np.ndarray
    X: Optional[np.ndarray] = None

    @property
    def n(self):
        return None if self.X is None else self.X.shape[0]


def rng(seed):
    return np.random.Generator(np.random.Philox(int(seed)))


def _sym_gaussian(gen, p):
    B = gen.standard_normal((p, p))
    return 0.5 * (B + B.T)


def _zero_offdiag(gen, M, frac):
    # zero round(frac * m) of the m upper off-diagonal slots, mirrored
    p = M.shape[0]
    iu, ju = np.triu_indices(p, k=1)
    k = int(round(frac * iu.size))
    pick = gen.choice(iu.size, size=k, replace=False)
    M[iu[pick], ju[pick]] = 0.0
    M[ju[pick], iu[pick]] = 0.0
    return M


def _shift_min_eig(M, target):
    M = M + (target - min_eigenvalue(M)) * np.eye(M.shape[0])
    return M


def gen_type1(p, zero_frac=0.77, seed=0):
    """Sparse precision with uniform random support and unit minimum eigenvalue."""
    gen = rng(seed)
    M = _zero_offdiag(gen, _sym_gaussian(gen, p), zero_frac)
    return _shift_min_eig(M, 1.0)


def gen_type2(p):
    """Banded precision: 1 on the diagonal, 0.5 at lag one, 0.25 at lag two."""
    if p < 2:
        raise ValueError("p must be >= 2")
    col = np.zeros(p)
    col[0] = 1.0
    col[1] = 0.5
    if p > 2:
        col[2] = 0.25
    return scipy.linalg.toeplitz(col)


def _appendix_matrix(gen, p):
    # random symmetric, half the off-diagonals zeroed, smallest eigenvalue lifted to 0
    M = _zero_offdiag(gen, _sym_gaussian(gen, p), 0.5)
    return _shift_min_eig(M, 0.0)


def gen_appendix_noise(p, tau, seed=0):
    """``Theta = A + tau I`` and ``S = inv(Theta) + N`` with ``A``, ``N`` PSD."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    gen = rng(seed)
    A = _appendix_matrix(gen, p)
    N = _appendix_matrix(gen, p)
    Theta = A + tau * np.eye(p)
    S = inv_pd(Theta) + N
    return Dataset(Theta, 0.5 * (S + S.T))


def sample_mvn(n, Theta_true, seed=0):
    """``n`` i.i.d. rows from ``N(0, inv(Theta_true))``."""
    Sigma = inv_pd(Theta_true)
    L = cholesky_pd(Sigma)
    Z = rng(seed).standard_normal((n, Sigma.shape[0]))
    return Z @ L.T


def sample_cov(X):
    """``X'X / n`` with no centering (zero-mean model)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    S = X.T @ X / X.shape[0]
    return 0.5 * (S + S.T)


def samples_to_csv(X):
    """``X`` as CSV text: one row per sample, 17 significant digits."""
    buf = io.StringIO()
    np.savetxt(buf, np.atleast_2d(X), fmt="%.17g", delimiter=",")
    return buf.getvalue()


def generate(spec: GeneratorSpec, n=None, sample_seed=None):
    """Build a :class:`Dataset` from ``spec``.

    Type-1 and Type-2 need ``n``: the input covariance is the sample
    covariance of ``n`` draws.  The appendix-noise model ignores ``n``.
    ``sample_seed`` defaults to ``spec.seed + 1``.
    """
    if spec.kind is Kind.APPENDIX_NOISE:
        return gen_appendix_noise(spec.p, spec.tau, spec.seed)
    if spec.kind is Kind.TYPE1:
        Theta = gen_type1(spec.p, spec.zero_frac, spec.seed)
    else:
        Theta = gen_type2(spec.p)
    if n is None:
        raise ValueError(f"{spec.kind.value} data needs a sample size n")
    X = sample_mvn(n, Theta, spec.seed + 1 if sample_seed is None else sample_seed)
    return Dataset(Theta, sample_cov(X), X)


# Sample covariance printed for the warm-start counterexample (n=2, p=5).
# Mirror entries disagree in the trailing digits (row 2 is a near copy of
# row 1), so the usable fixture is the mirror average.
APPENDIX_EXAMPLE1_RAW = np.array([
    [0.03597652, 0.03792221, 0.1058585, -0.08360659, 0.1366725],
    [0.03597652, 0.03792221, 0.1058585, -0.08360659, 0.1366725],
    [0.10585853, 0.11158361, 0.3114818, -0.24600689, 0.4021497],
    [-0.08360659, -0.08812823, -0.2460069, 0.19429514, -0.3176160],
    [0.13667246, 0.14406402, 0.4021497, -0.31761603, 0.5192098],
])


def appendix_example1_fixture(raw=False):
    M = APPENDIX_EXAMPLE1_RAW.copy()
    return M if raw else 0.5 * (M + M.T)


# Seeded instance on which GLASSO's primal objective f(inv(W)) rises
# between consecutive column updates (found by scanning seeds).
NONMONOTONE_SPEC = GeneratorSpec(Kind.TYPE1, p=10, seed=0)
NONMONOTONE_N = 20
NONMONOTONE_GRID_POS = 10  # lambda = 0.8**10 * 0.9 * lambda_max


def glasso_nonmonotone_fixture():
    """Return ``(S, lam)`` for the seeded non-monotone GLASSO example."""
    S = generate(NONMONOTONE_SPEC, n=NONMONOTONE_N).S
    off = np.abs(S - np.diag(np.diag(S)))
    lam = 0.8 ** NONMONOTONE_GRID_POS * 0.9 * float(off.max())
    return S, lam
