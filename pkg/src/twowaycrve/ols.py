"""
OLS fit and the cluster-level building blocks used by every variance
estimator: empirical scores, cluster Gram matrices and (for testing only)
the modified scores built from the diagonal blocks of the annihilator.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveDefinite, RankDeficient, SingularMjj
from .numkernel import chol_solve, symmetrize


@dataclass(frozen=True)
class OlsFit:
    beta: np.ndarray
    resid: np.ndarray
    gram: np.ndarray
    gram_inv: np.ndarray
    xty: np.ndarray
    ds: object

    @property
    def N(self):
        return self.ds.N

    @property
    def k(self):
        return self.ds.k


@dataclass(frozen=True)
class ClusterScores:
    dim: str
    scores: np.ndarray  # (J, k)


@dataclass(frozen=True)
class ClusterGrams:
    dim: str
    xtx: np.ndarray  # (J, k, k)
    xty: np.ndarray  # (J, k)


def fit_ols(ds, gram=None, xty=None):
    """Least-squares fit; ``gram``/``xty`` may be passed in when they were
    already accumulated from cluster grams."""
    X, y = ds.X, ds.y
    A = symmetrize(X.T @ X) if gram is None else gram
    c = X.T @ y if xty is None else xty
    k = A.shape[0]
    try:
        sol = chol_solve(A, np.column_stack([c, np.eye(k)]))
    except NotPositiveDefinite:
        raise RankDeficient("X'X is not positive definite") from None
    beta = sol[:, 0]
    Ai = symmetrize(sol[:, 1:])
    resid = y - X @ beta
    return OlsFit(beta, resid, A, Ai, c, ds)


def _segment_sum(values, idx):
    """Sum rows of ``values`` within each cluster of ``idx``."""
    if idx.contiguous:
        return np.add.reduceat(values, idx.starts, axis=0) if values.shape[0] else values
    return np.add.reduceat(values[idx.order], idx.starts, axis=0)


def cluster_scores(fit, idx):
    """Empirical score vectors X_j' u_j, one row per cluster."""
    s = _segment_sum(fit.ds.X * fit.resid[:, None], idx)
    return ClusterScores(idx.dim, s)


def cluster_grams(ds, idx):
    """X_j'X_j and X_j'y_j for every cluster of ``idx``."""
    X, y = ds.X, ds.y
    k = ds.k
    xtx = np.empty((idx.J, k, k))
    for j in range(idx.J):
        if idx.contiguous:
            s = idx.starts[j]
            Xj = X[s:s + idx.sizes[j]]
        else:
            Xj = X[idx.members(j)]
        xtx[j] = Xj.T @ Xj
    xty = _segment_sum(X * y[:, None], idx)
    return ClusterGrams(idx.dim, xtx, xty)


def sum_grams(igrams, idx_i, which, J):
    """Aggregate intersection grams into G (``which=0``) or H (``which=1``)
    grams."""
    parent = idx_i.parents[:, which]
    P = np.zeros((J, len(parent)))
    P[parent, np.arange(len(parent))] = 1.0
    I, k = igrams.xty.shape
    xtx = (P @ igrams.xtx.reshape(I, k * k)).reshape(J, k, k)
    return ClusterGrams("GH"[which], xtx, P @ igrams.xty)


def all_grams(ds, gi, hi, ii):
    """Grams for the three dimensions from one pass over the intersections."""
    gI = cluster_grams(ds, ii)
    return sum_grams(gI, ii, 0, gi.J), sum_grams(gI, ii, 1, hi.J), gI


def modified_scores(fit, idx):
    """Scores X_j' M_jj^{-1} u_j with M_jj the (j, j) block of the
    annihilator. Materializes each N_j x N_j block, so intended for checks
    on small problems only."""
    X, u, Ai = fit.ds.X, fit.resid, fit.gram_inv
    out = np.empty((idx.J, fit.k))
    for j in range(idx.J):
        rows = idx.members(j)
        Xj = X[rows]
        Mjj = np.eye(len(rows)) - Xj @ Ai @ Xj.T
        try:
            out[j] = Xj.T @ chol_solve(Mjj, u[rows])
        except NotPositiveDefinite:
            raise SingularMjj(idx.labels[j]) from None
        # Cholesky may pass on a block that is singular up to rounding
        if np.linalg.eigvalsh(Mjj)[0] < 1e-10:
            raise SingularMjj(idx.labels[j])
    return ClusterScores(idx.dim, out)
