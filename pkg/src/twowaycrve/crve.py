"""
Cluster-robust variance matrix estimators.

CV1 components are plug-in sandwiches with the usual small-sample factor.
CV3 components are cluster jackknives built from delete-one-cluster
estimates. Both families are combined into two-term, three-term,
eigenvalue-repaired three-term and max-se estimators.
"""

from dataclasses import dataclass, field

import numpy as np

from .dataset import dataset_indices
from .errors import SingularReducedGram, TooFewClusters
from .numkernel import batched_solve_spd, pinv_sym, sym_eigen, symmetrize
from .ols import ClusterScores, all_grams, cluster_scores, fit_ols

ETA = 1e-12

FAMILIES = ("CV1", "CV3")
ARITIES = ("hc", "oneway-I", "oneway-G", "oneway-H", "two-term", "three-term",
           "three-plus", "max")


def estimator_tag(family, arity):
    """Display name, e.g. ``CV3(max)`` or ``CV1-G``."""
    if arity == "hc":
        return "HC1" if family == "CV1" else "HC3"
    if arity.startswith("oneway-"):
        return f"{family}-{arity[-1]}"
    suffix = {"two-term": "2", "three-term": "3", "three-plus": "3+", "max": "max"}[arity]
    return f"{family}({suffix})"


TAGS = tuple(estimator_tag(f, a) for f in FAMILIES for a in ARITIES)


@dataclass(frozen=True)
class CrveMatrix:
    """A variance matrix estimate.

    ``index`` lists the coefficients for which the matrix is meaningful.
    With fixed effects handled through a generalized inverse, jackknife
    matrices are only meaningful for the ordinary regressors, although the
    full k x k array is kept.
    """

    matrix: np.ndarray
    family: str
    arity: str
    index: np.ndarray

    def covers(self, j):
        return bool(np.isin(j, self.index).all())

    def block(self):
        ix = self.index
        return self.matrix[np.ix_(ix, ix)]

    def var(self, j):
        if not self.covers(j):
            raise IndexError(f"coefficient {j} is not covered by this {self.family} matrix")
        return float(self.matrix[j, j])

    def is_defined(self, j):
        return self.var(j) > 0

    def se(self, j):
        v = self.var(j)
        return float(np.sqrt(v)) if v > 0 else float("nan")

    @property
    def defined(self):
        return bool(np.all(np.diag(self.block()) > 0))


@dataclass(frozen=True)
class JackknifeBetas:
    dim: str
    betas: np.ndarray  # (J, k)
    ginv_used: bool
    singular: np.ndarray = field(default=None)  # which clusters needed the g-inverse


def cv1_component(fit, scores, index=None):
    """Plug-in CRVE (X'X)^-1 (sum_j s_j s_j') (X'X)^-1 times
    J(N-1)/((J-1)(N-k))."""
    S = scores.scores if hasattr(scores, "scores") else np.asarray(scores)
    J = S.shape[0]
    if J < 2:
        raise TooFewClusters(f"{getattr(scores, 'dim', '?')} dimension has {J} cluster(s)")
    N, k = fit.N, fit.k
    B = S @ fit.gram_inv
    V = J * (N - 1) / ((J - 1) * (N - k)) * (B.T @ B)
    arity = "hc" if getattr(scores, "dim", "") == "obs" else f"oneway-{getattr(scores, 'dim', 'G')}"
    ix = np.arange(k) if index is None else np.asarray(index)
    return CrveMatrix(symmetrize(V), "CV1", arity, ix)


def delete_one_betas(grams, full_gram, full_xty, ginv=False, labels=None):
    """beta^(j) = (X'X - X_j'X_j)^-1 (X'y - X_j'y_j) for every cluster.

    With ``ginv`` the inverse is replaced by the Moore-Penrose inverse
    wherever the reduced Gram is singular; a fixed effect whose column
    vanishes from the reduced sample then gets coefficient zero.
    """
    J = grams.xtx.shape[0]
    if J < 2:
        raise TooFewClusters(f"{grams.dim} dimension has {J} cluster(s)")
    A = full_gram[None, :, :] - grams.xtx
    c = full_xty[None, :] - grams.xty
    betas, singular = batched_solve_spd(A, c, ginv=ginv, scale=np.diag(full_gram))
    if singular.any() and not ginv:
        j = int(np.flatnonzero(singular)[0])
        raise SingularReducedGram(labels[j] if labels is not None else j)
    return JackknifeBetas(grams.dim, betas, bool(singular.any()), singular)


def cv3_component(betas, beta_hat, index=None):
    """((J-1)/J) sum_j (beta^(j) - beta)(beta^(j) - beta)'."""
    B = betas.betas if hasattr(betas, "betas") else np.asarray(betas)
    J = B.shape[0]
    if J < 2:
        raise TooFewClusters(f"{getattr(betas, 'dim', '?')} dimension has {J} cluster(s)")
    D = B - beta_hat[None, :]
    V = (J - 1) / J * (D.T @ D)
    dim = getattr(betas, "dim", "G")
    arity = "hc" if dim == "obs" else f"oneway-{dim}"
    ix = np.arange(B.shape[1]) if index is None else np.asarray(index)
    return CrveMatrix(symmetrize(V), "CV3", arity, ix)


def combine(VG, VH, VI, mode="three-term"):
    """V_G + V_H - V_I (three-term) or V_G + V_H (two-term)."""
    fams = {VG.family, VH.family} | ({VI.family} if VI is not None else set())
    if len(fams) != 1:
        raise ValueError("cannot combine matrices from different families")
    ix = np.intersect1d(VG.index, VH.index)
    if mode == "two-term":
        M = VG.matrix + VH.matrix
    elif mode == "three-term":
        ix = np.intersect1d(ix, VI.index)
        M = VG.matrix + VH.matrix - VI.matrix
    else:
        raise ValueError(f"unknown combination mode {mode!r}")
    return CrveMatrix(M, VG.family, mode, ix)


def eigenfix(V3, eta=ETA):
    """Replace eigenvalues below ``eta`` by ``eta``; returns the input matrix
    unchanged when it already has all eigenvalues >= eta."""
    ed = sym_eigen(V3.matrix)
    if ed.values[0] >= eta:
        return CrveMatrix(V3.matrix, V3.family, "three-plus", V3.index)
    M = ed.reconstruct(np.maximum(ed.values, eta))
    return CrveMatrix(M, V3.family, "three-plus", V3.index)


def hc_scores(fit):
    return ClusterScores("obs", fit.ds.X * fit.resid[:, None])


def hc3_betas(fit, ginv=False):
    """Delete-one-observation estimates via the rank-one downdate
    beta^(i) = beta - (X'X)^-1 x_i u_i / (1 - h_i); observations with
    h_i = 1 fall back to a (generalized-inverse) solve."""
    X, u, Ai = fit.ds.X, fit.resid, fit.gram_inv
    XA = X @ Ai
    h = np.einsum("ij,ij->i", XA, X)
    denom = 1.0 - h
    bad = denom <= 1e-10
    D = np.zeros_like(X)
    good = ~bad
    D[good] = -XA[good] * (u[good] / denom[good])[:, None]
    betas = fit.beta[None, :] + D
    if bad.any():
        rows = np.flatnonzero(bad)
        if not ginv:
            raise SingularReducedGram(f"observation {int(rows[0])}")
        Xb = X[rows]
        A = fit.gram[None] - Xb[:, :, None] * Xb[:, None, :]
        c = fit.xty[None] - Xb * fit.ds.y[rows][:, None]
        betas[rows] = (pinv_sym(A) @ c[..., None])[..., 0]
    return JackknifeBetas("obs", betas, bool(bad.any()), bad)


@dataclass(frozen=True)
class SeEntry:
    tag: str
    family: str
    arity: str
    se: float
    defined: bool
    selected: str = None


@dataclass
class VarianceMenu:
    """Standard errors of one coefficient under all sixteen estimators, plus
    the matrices and jackknife estimates they were built from."""

    fit: object
    coef: int
    entries: list
    matrices: dict
    jackknife: dict
    counts: dict

    def __getitem__(self, tag):
        for e in self.entries:
            if e.tag == tag:
                return e
        raise KeyError(tag)

    def se(self, tag):
        return self[tag].se


def _two_way_scores(fit, gi, hi, ii):
    # G and H scores are sums of intersection scores
    sI = cluster_scores(fit, ii)
    if ii.parents is None:
        return cluster_scores(fit, gi), cluster_scores(fit, hi), sI
    out = []
    for which, idx in ((0, gi), (1, hi)):
        S = np.zeros((idx.J, fit.k))
        np.add.at(S, ii.parents[:, which], sI.scores)
        out.append(ClusterScores(idx.dim, S))
    return out[0], out[1], sI


def _max_se(V3, VG, VH, j):
    cands = []
    if V3.is_defined(j):
        cands.append((V3.se(j), "three-term"))
    cands.append((VG.se(j), "G"))
    cands.append((VH.se(j), "H"))
    cands = [c for c in cands if np.isfinite(c[0])]
    if not cands:
        return float("nan"), None
    best = max(cands, key=lambda c: c[0])  # first wins on ties
    return best


def variance_menu(fit, coef=None, indices=None, grams=None, ginv=None, eta=ETA,
                  with_hc=True):
    """All sixteen standard errors for coefficient ``coef``.

    ``indices`` (G, H, I cluster indices) and ``grams`` (matching cluster
    grams) can be supplied to avoid recomputing them. ``ginv`` defaults to
    true when the design has fixed-effect columns.
    """
    ds = fit.ds
    j = ds.coef if coef is None else coef
    if indices is None:
        indices = dataset_indices(ds)
    gi, hi, ii = indices
    for idx in (gi, hi):
        if idx.J < 2:
            raise TooFewClusters(f"{idx.dim} dimension has {idx.J} cluster(s)")
    if grams is None:
        grams = all_grams(ds, gi, hi, ii)
    if ginv is None:
        ginv = ds.has_fe
    k = ds.k
    full = np.arange(k)

    mats = {}
    jk = {}
    for sc in _two_way_scores(fit, gi, hi, ii):
        mats[("CV1", f"oneway-{sc.dim}")] = cv1_component(fit, sc)
    for idx, gr in zip((gi, hi, ii), grams):
        b = delete_one_betas(gr, fit.gram, fit.xty, ginv=ginv, labels=idx.labels)
        jk[idx.dim] = b
        ix = ds.z_index if b.ginv_used else full
        mats[("CV3", f"oneway-{idx.dim}")] = cv3_component(b, fit.beta, ix)
    if with_hc:
        mats[("CV1", "hc")] = cv1_component(fit, hc_scores(fit))
        b = hc3_betas(fit, ginv=ginv)
        jk["obs"] = b
        mats[("CV3", "hc")] = cv3_component(b, fit.beta, ds.z_index if b.ginv_used else full)

    entries = []
    for fam in FAMILIES:
        VG, VH, VI = (mats[(fam, f"oneway-{d}")] for d in "GHI")
        V2 = combine(VG, VH, VI, "two-term")
        V3 = combine(VG, VH, VI, "three-term")
        V3p = eigenfix(V3, eta)
        mats[(fam, "two-term")] = V2
        mats[(fam, "three-term")] = V3
        mats[(fam, "three-plus")] = V3p
        for arity in ARITIES:
            tag = estimator_tag(fam, arity)
            if arity == "max":
                se, sel = _max_se(V3, VG, VH, j)
                entries.append(SeEntry(tag, fam, arity, se, bool(np.isfinite(se)), sel))
                continue
            if arity == "hc" and not with_hc:
                entries.append(SeEntry(tag, fam, arity, float("nan"), False))
                continue
            V = mats[(fam, arity)]
            if not V.covers(j):
                entries.append(SeEntry(tag, fam, arity, float("nan"), False))
                continue
            entries.append(SeEntry(tag, fam, arity, V.se(j), V.is_defined(j)))
    counts = {"N": ds.N, "k": k, "p": int((~ds.fe_mask).sum()), "G": gi.J, "H": hi.J, "I": ii.J}
    return VarianceMenu(fit, j, entries, mats, jk, counts)


def menu_for_dataset(ds, coef=None, **kw):
    """Convenience: fit OLS with grams accumulated over intersections, then
    build the variance menu."""
    indices = dataset_indices(ds)
    grams = all_grams(ds, *indices)
    gram = symmetrize(grams[2].xtx.sum(axis=0))
    fit = fit_ols(ds, gram=gram, xty=grams[2].xty.sum(axis=0))
    return variance_menu(fit, coef, indices=indices, grams=grams, **kw)
