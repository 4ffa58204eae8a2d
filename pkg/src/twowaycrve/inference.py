"""
Test statistics, p-values and confidence intervals from variance estimates.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveDefinite
from .numkernel import chol_solve, student_t_pvalue, student_t_quantile


@dataclass(frozen=True)
class TestResult:
    tag: str
    family: str
    arity: str
    coef: float
    se: float
    stat: float
    df: int
    p: float
    ci_lo: float
    ci_hi: float
    defined: bool
    selected: str = None

    __test__ = False  # not a pytest class


def wald(R, r, beta_hat, V):
    """(R b - r)' (R V R')^-1 (R b - r), or None if R V R' is not positive
    definite.

    ``V`` is a CrveMatrix or a plain array. When it is a CrveMatrix, ``R``
    may only load on covered coefficients.
    """
    R = np.atleast_2d(np.asarray(R, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    M = getattr(V, "matrix", V)
    index = getattr(V, "index", None)
    if index is not None:
        outside = np.setdiff1d(np.arange(R.shape[1]), index)
        if np.any(R[:, outside] != 0):
            raise ValueError("restriction involves coefficients not covered by V")
    if np.linalg.matrix_rank(R) < R.shape[0]:
        raise ValueError("R must have full row rank")
    d = R @ beta_hat - r
    RVR = R @ M @ R.T
    try:
        x = chol_solve(RVR, d)
    except NotPositiveDefinite:
        return None
    return float(d @ x)


def w_min(W3, WG, WH):
    """min{max{W3, 0}, WG, WH}, where an undefined or negative W3 counts as 0.

    Returns the statistic and the component that attains it.
    """
    w3 = 0.0 if W3 is None or not np.isfinite(W3) or W3 < 0 else float(W3)
    cands = [(w3, "three-term"), (float(WG), "G"), (float(WH), "H")]
    return min(cands, key=lambda c: c[0])


def df_for(arity, counts):
    """Reference t degrees of freedom: min(G,H)-1 for two-way estimators,
    J-1 for one-way ones, N-k for heteroskedasticity-robust ones."""
    if arity == "hc":
        return counts["N"] - counts["k"]
    if arity.startswith("oneway-"):
        return counts[arity[-1]] - 1
    return min(counts["G"], counts["H"]) - 1


def t_result(beta_j, entry, df, level=0.95, null=0.0):
    if not entry.defined or not np.isfinite(entry.se) or entry.se <= 0:
        nan = float("nan")
        return TestResult(entry.tag, entry.family, entry.arity, float(beta_j), nan, nan,
                          df, nan, nan, nan, False, entry.selected)
    t = (beta_j - null) / entry.se
    p = student_t_pvalue(t, df)
    c = student_t_quantile(0.5 + level / 2.0, df)
    return TestResult(entry.tag, entry.family, entry.arity, float(beta_j), float(entry.se),
                      float(t), df, p, beta_j - c * entry.se, beta_j + c * entry.se,
                      True, entry.selected)


def t_report(beta_j, menu_entries, counts, level=0.95, null=0.0):
    """t-tests for every standard error in a variance menu."""
    return [t_result(beta_j, e, df_for(e.arity, counts), level, null) for e in menu_entries]


def report_for_menu(menu, level=0.95, null=0.0):
    beta_j = float(menu.fit.beta[menu.coef])
    return t_report(beta_j, menu.entries, menu.counts, level, null)


def rejects(result, alpha=0.05):
    """Undefined statistics count as rejections."""
    if not result.defined or math.isnan(result.p):
        return True
    return result.p < alpha
