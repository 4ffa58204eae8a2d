"""
Dense symmetric linear algebra and Student-t tail probabilities.

The matrix routines are thin wrappers over LAPACK (through numpy/scipy)
that enforce symmetry, translate failures into package exceptions and
work on stacks of matrices where the callers need it. The Student-t
p-value is computed from the regularized incomplete beta function,
evaluated with a modified Lentz continued fraction.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

from .errors import NoConvergence, NotPositiveDefinite

PINV_TOL = 1e-10
_CF_EPS = 1e-12
_CF_TINY = 1e-300
_CF_MAXITER = 20000


def symmetrize(A):
    """Return (A + A^T)/2 over the last two axes."""
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + np.swapaxes(A, -1, -2))


@dataclass(frozen=True)
class EigenDecomp:
    """Eigenvalues in ascending order and the matching orthonormal eigenvectors
    (columns of ``vectors``)."""

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self, values=None):
        lam = self.values if values is None else values
        U = self.vectors
        return symmetrize((U * lam[..., None, :]) @ np.swapaxes(U, -1, -2))


def chol_solve(A, B):
    """Solve A X = B for symmetric positive definite A.

    Raises
    ------
    NotPositiveDefinite
        If the Cholesky factorization hits a non-positive pivot.
    """
    A = symmetrize(A)
    try:
        c = sla.cho_factor(A, lower=True, check_finite=True)
    except sla.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    return sla.cho_solve(c, np.asarray(B, dtype=float))


def sym_eigen(A):
    """Eigen-decomposition of a symmetric matrix (or a stack of them)."""
    A = symmetrize(A)
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    try:
        w, U = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from None
    return EigenDecomp(w, U)


def pinv_sym(A, tol=PINV_TOL):
    """Moore-Penrose pseudo-inverse of a symmetric matrix.

    Reciprocals of eigenvalues with ``|lambda| <= tol * max|lambda|`` are
    set to zero. Works on a single matrix or a stack ``(..., k, k)``.
    """
    ed = sym_eigen(A)
    w = ed.values
    cut = tol * np.max(np.abs(w), axis=-1, keepdims=True)
    keep = np.abs(w) > cut
    winv = np.zeros_like(w)
    np.divide(1.0, w, out=winv, where=keep)
    return ed.reconstruct(winv)


def _eig_solve(A, B, tol):
    # pseudo-inverse solve for a whole stack; equals the inverse where regular
    ed = sym_eigen(A)
    w = ed.values
    cut = tol * np.max(np.abs(w), axis=-1, keepdims=True)
    keep = np.abs(w) > cut
    winv = np.zeros_like(w)
    np.divide(1.0, w, out=winv, where=keep)
    V = ed.vectors
    proj = np.einsum("jab,ja->jb", V, B) * winv
    x = np.einsum("jab,jb->ja", V, proj)
    return x, ~keep.all(axis=1)


def batched_solve_spd(A, B, ginv=False, tol=PINV_TOL, scale=None):
    """Solve a stack of symmetric systems ``A[j] x_j = B[j]``.

    Each system is first attempted with a Cholesky factorization. A system
    counts as singular when the factorization fails or some pivot falls
    below ``tol`` times the matching entry of ``scale`` (default: the
    diagonal of ``A``). Passing the diagonal of the matrix that ``A`` was
    downdated from catches columns that vanish up to rounding. Singular systems are solved with
    the pseudo-inverse when ``ginv`` is true.

    Returns
    -------
    x : ndarray, shape (J, k)
    singular : ndarray of bool, shape (J,)
        Systems whose Cholesky factorization failed or was ill-conditioned.
    """
    A = symmetrize(A)
    B = np.asarray(B, dtype=float)
    J, k = B.shape
    x = np.zeros((J, k))
    try:
        L = np.linalg.cholesky(A)
        ok = np.all(np.isfinite(L), axis=(1, 2))
    except np.linalg.LinAlgError:
        if ginv:
            return _eig_solve(A, B, tol)
        L = np.zeros_like(A)
        ok = np.zeros(J, dtype=bool)
        for j in range(J):
            try:
                L[j] = np.linalg.cholesky(A[j])
                ok[j] = True
            except np.linalg.LinAlgError:
                pass
    piv = np.diagonal(L, axis1=1, axis2=2) ** 2
    dA = np.diagonal(A, axis1=1, axis2=2) if scale is None else np.broadcast_to(scale, (J, k))
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(dA > 0, piv / dA, 0.0)
    ok &= rel.min(axis=1) > tol
    if ok.any():
        x[ok] = np.linalg.solve(A[ok], B[ok][..., None])[..., 0]
    singular = ~ok
    if singular.any() and ginv:
        P = pinv_sym(A[singular], tol)
        x[singular] = (P @ B[singular][..., None])[..., 0]
    return x, singular


def _betacf(a, b, x):
    """Continued fraction for I_x(a, b) (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAXITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise NoConvergence(f"incomplete beta continued fraction (a={a}, b={b}, x={x})")


def betainc_reg(a, b, x, xc=None):
    """Regularized incomplete beta function I_x(a, b) for scalar arguments.

    ``xc`` may carry 1 - x when the caller can form it without
    cancellation.
    """
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if xc is None:
        xc = 1.0 - x
    if x <= 0.0:
        return 0.0
    if xc <= 0.0:
        return 1.0
    lbeta = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
    front = math.exp(lbeta + a * math.log(x) + b * math.log(xc))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, xc) / b


def student_t_pvalue(t, df):
    """Two-sided p-value P(|T| >= |t|) for T ~ t(df).

    Non-finite ``t`` other than +-inf propagates as NaN.
    """
    if df < 1:
        raise ValueError("df must be >= 1")
    t = float(t)
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 0.0
    if t == 0.0:
        return 1.0
    t2 = t * t
    x = df / (df + t2)
    return min(1.0, max(0.0, betainc_reg(0.5 * df, 0.5, x, t2 / (df + t2))))


def student_t_quantile(prob, df):
    """Upper quantile c with P(|T| >= c) = 2 * (1 - prob), i.e. the two-sided
    critical value for level ``prob`` = 1 - alpha/2."""
    if not 0.5 < prob < 1.0:
        raise ValueError("prob must lie in (0.5, 1)")
    target = 2.0 * (1.0 - prob)
    hi = 1.0
    while student_t_pvalue(hi, df) > target:
        hi *= 2.0
    return brentq(lambda c: student_t_pvalue(c, df) - target, 0.0, hi, xtol=1e-13, rtol=1e-14)
