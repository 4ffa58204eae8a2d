"""
Cluster-level influence diagnostics for one coefficient: leverage,
partial leverage, omit-one-cluster estimates and the effective number of
clusters.
"""

from dataclasses import dataclass

import numpy as np

from .crve import delete_one_betas
from .dataset import dataset_indices
from .errors import CollinearColumn, DegenerateSelector
from .ols import cluster_grams


def _per_cluster(values, idx):
    return np.bincount(idx.codes, weights=values, minlength=idx.J)


def leverage(fit, idx):
    """L_j = trace(X_j (X'X)^-1 X_j'), which sums to k over clusters."""
    X = fit.ds.X
    h = np.einsum("ij,ij->i", X @ fit.gram_inv, X)
    return _per_cluster(h, idx)


def _selector_scores(fit, coef):
    # X (X'X)^-1 e_j is the residualized column j scaled by 1/(x~'x~)
    a = fit.gram_inv[:, coef]
    return fit.ds.X @ a, a[coef]


def partial_leverage(fit, idx, coef):
    """Share of the residualized regressor's sum of squares in each cluster.

    The residual of column ``coef`` on the other columns is proportional to
    X (X'X)^-1 e_coef, so no auxiliary regression is needed.
    """
    xcol = fit.ds.X[:, coef]
    v, ajj = _selector_scores(fit, coef)
    # x~'x~ = 1 / [(X'X)^-1]_jj
    if not np.isfinite(ajj) or ajj <= 0 or 1.0 / ajj <= 1e-12 * (xcol @ xcol):
        raise CollinearColumn(f"column {coef} is collinear with the others")
    return _per_cluster(v * v, idx) / ajj


def gstar(fit, idx, coef):
    """Effective number of clusters at rho = 0.

    gamma_j = a'(X'X)^-1 X_j'X_j (X'X)^-1 a with a selecting the coefficient;
    G* = J / (1 + Gamma) where Gamma is the mean squared deviation of the
    gamma_j over their squared mean.
    """
    v, _ = _selector_scores(fit, coef)
    gam = _per_cluster(v * v, idx)
    gbar = gam.mean()
    if gbar <= 0:
        raise DegenerateSelector("all cluster contributions are zero")
    Gam = np.mean((gam - gbar) ** 2) / gbar ** 2
    return float(idx.J / (1.0 + Gam))


def coef_variation(values):
    """Sample standard deviation (J-1 denominator) over |mean|."""
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return float("nan")
    m = abs(values.mean())
    if m == 0:
        return float("nan")
    return float(values.std(ddof=1) / m)


@dataclass(frozen=True)
class DimDiagnostics:
    dim: str
    name: str
    J: int
    cv_size: float
    cv_leverage: float
    cv_partial_leverage: float
    cv_beta: float
    gstar: float


@dataclass(frozen=True)
class DiagPanel:
    coef_name: str
    rows: tuple  # DimDiagnostics for G, H, I


def diag_panel(fit, coef=None, indices=None, jackknife=None):
    """Coefficients of variation for cluster sizes, leverage, partial leverage
    and omit-one-cluster estimates, plus J and G*, for G, H and their
    intersections.

    ``jackknife`` may hold already computed delete-one estimates keyed by
    dimension (as in ``VarianceMenu.jackknife``).
    """
    ds = fit.ds
    j = ds.coef if coef is None else coef
    if indices is None:
        indices = dataset_indices(ds)
    rows = []
    names = {"G": ds.g_name, "H": ds.h_name, "I": "intersect"}
    for idx in indices:
        if jackknife is not None and idx.dim in jackknife:
            b = jackknife[idx.dim]
        else:
            b = delete_one_betas(cluster_grams(ds, idx), fit.gram, fit.xty, ginv=True)
        rows.append(DimDiagnostics(
            idx.dim, names[idx.dim], idx.J,
            coef_variation(idx.sizes),
            coef_variation(leverage(fit, idx)),
            coef_variation(partial_leverage(fit, idx, j)),
            coef_variation(b.betas[:, j]),
            gstar(fit, idx, j),
        ))
    return DiagPanel(ds.names[j], tuple(rows))
