"""
Tabular input, cluster indices and fixed-effect dummy expansion.
"""

import re
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from .errors import EmptyData, MissingColumn, NotPositiveDefinite, ParseError, RankDeficient
from .numkernel import chol_solve


@dataclass(frozen=True)
class Dataset:
    """Regression data with two clustering dimensions.

    ``fe_mask`` flags the columns of ``X`` that are fixed-effect dummies;
    the remaining columns form the block of ordinary regressors. ``coef``
    is the column index of the coefficient of interest.
    """

    y: np.ndarray
    X: np.ndarray
    g_labels: np.ndarray
    h_labels: np.ndarray
    names: tuple
    coef: int = 0
    fe_mask: np.ndarray = None
    g_name: str = "G"
    h_name: str = "H"

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ValueError("y must be a vector with one entry per row of X")
        N, k = X.shape
        if N == 0:
            raise EmptyData("dataset has no rows")
        if k < 1 or k > N:
            raise ValueError(f"need 1 <= k <= N, got k={k}, N={N}")
        if len(self.g_labels) != N or len(self.h_labels) != N:
            raise ValueError("cluster label vectors must have length N")
        mask = np.zeros(k, dtype=bool) if self.fe_mask is None else np.asarray(self.fe_mask, bool)
        names = tuple(self.names) if self.names is not None else tuple(f"x{i}" for i in range(k))
        if len(names) != k or mask.shape != (k,):
            raise ValueError("names and fe_mask must have one entry per column")
        if not 0 <= self.coef < k:
            raise ValueError("coefficient index out of range")
        for arr in (y, X, mask):
            arr.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "fe_mask", mask)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "g_labels", np.asarray(self.g_labels))
        object.__setattr__(self, "h_labels", np.asarray(self.h_labels))

    @property
    def N(self):
        return self.X.shape[0]

    @property
    def k(self):
        return self.X.shape[1]

    @property
    def has_fe(self):
        return bool(self.fe_mask.any())

    @property
    def z_index(self):
        """Indices of the non fixed-effect columns."""
        return np.flatnonzero(~self.fe_mask)

    def with_column(self, values, name, first=True):
        """Return a copy with an extra regressor, which becomes the coefficient
        of interest."""
        values = np.asarray(values, dtype=float)
        if first:
            X = np.column_stack([values, self.X])
            names = (name,) + self.names
            mask = np.concatenate([[False], self.fe_mask])
            coef = 0
        else:
            X = np.column_stack([self.X, values])
            names = self.names + (name,)
            mask = np.concatenate([self.fe_mask, [False]])
            coef = X.shape[1] - 1
        return replace(self, X=X, names=names, fe_mask=mask, coef=coef)

    def with_y(self, y):
        return replace(self, y=np.asarray(y, dtype=float))


@dataclass(frozen=True)
class ClusterIndex:
    """Partition of the rows into clusters, ordered by first appearance.

    ``codes[i]`` is the cluster of row ``i``. ``order`` lists the rows
    grouped by cluster (stable within a cluster) and ``starts`` gives the
    offset of each cluster in ``order``. For the intersection dimension,
    ``parents`` holds the (g, h) cluster codes of each intersection.
    """

    dim: str
    codes: np.ndarray
    labels: tuple
    sizes: np.ndarray
    order: np.ndarray
    starts: np.ndarray
    parents: np.ndarray = None
    contiguous: bool = field(default=False)

    @property
    def J(self):
        return len(self.sizes)

    @property
    def N(self):
        return len(self.codes)

    def members(self, j):
        s = self.starts[j]
        return self.order[s:s + self.sizes[j]]

    def groups(self):
        return [self.members(j) for j in range(self.J)]


def _index_from_codes(dim, codes, labels, parents=None):
    codes = np.asarray(codes, dtype=np.intp)
    J = len(labels)
    sizes = np.bincount(codes, minlength=J)
    order = np.argsort(codes, kind="stable")
    starts = np.zeros(J, dtype=np.intp)
    np.cumsum(sizes[:-1], out=starts[1:])
    contiguous = bool(np.all(order == np.arange(len(codes))))
    for arr in (codes, sizes, order, starts):
        arr.setflags(write=False)
    return ClusterIndex(dim, codes, tuple(labels), sizes, order, starts, parents, contiguous)


def build_cluster_index(labels, dim="G"):
    """Index clusters by order of first appearance."""
    codes, uniques = pd.factorize(np.asarray(labels), sort=False)
    if (codes < 0).any():
        raise ValueError("cluster labels contain missing values")
    return _index_from_codes(dim, codes, list(uniques))


def intersect_index(gi, hi):
    """Index of the non-empty intersections of two clusterings."""
    if gi.N != hi.N:
        raise ValueError("indices cover different numbers of rows")
    pair = gi.codes.astype(np.int64) * hi.J + hi.codes
    codes, uniques = pd.factorize(pair, sort=False)
    parents = np.column_stack([uniques // hi.J, uniques % hi.J]).astype(np.intp)
    labels = [(gi.labels[g], hi.labels[h]) for g, h in parents]
    return _index_from_codes("I", codes, labels, parents)


def dataset_indices(ds):
    """Cluster indices (G, H, I) for a dataset."""
    gi = build_cluster_index(ds.g_labels, "G")
    hi = build_cluster_index(ds.h_labels, "H")
    return gi, hi, intersect_index(gi, hi)


@dataclass(frozen=True)
class FeSpec:
    """Categorical columns to expand into dummies.

    The first block keeps every level; each later block drops one level
    (``drop="first"`` or ``"last"`` in order of appearance). No global
    intercept is added next to the dummies.
    """

    columns: tuple
    drop: str = "first"


def dummy_block(values, drop=None, prefix="fe"):
    codes, uniques = pd.factorize(np.asarray(values), sort=False)
    D = np.zeros((len(codes), len(uniques)))
    D[np.arange(len(codes)), codes] = 1.0
    names = [f"{prefix}={u}" for u in uniques]
    if drop == "first":
        D, names = D[:, 1:], names[1:]
    elif drop == "last":
        D, names = D[:, :-1], names[:-1]
    return D, names


def expand_fixed_effects(ds, fe, columns):
    """Append fixed-effect dummies to ``ds``.

    Parameters
    ----------
    ds : Dataset
        Data whose ``X`` holds the ordinary regressors only (no constant).
    fe : FeSpec
    columns : mapping of column name -> label vector (length N)

    Raises
    ------
    RankDeficient
        If the expanded design has a singular Gram matrix.
    """
    if not fe.columns:
        return ds
    blocks, names = [ds.X], list(ds.names)
    mask = [ds.fe_mask]
    for b, col in enumerate(fe.columns):
        D, nm = dummy_block(columns[col], None if b == 0 else fe.drop, prefix=col)
        blocks.append(D)
        names.extend(nm)
        mask.append(np.ones(D.shape[1], dtype=bool))
    X = np.column_stack(blocks)
    if X.shape[1] > X.shape[0]:
        raise RankDeficient(f"k={X.shape[1]} exceeds N={X.shape[0]} after expansion")
    check_full_rank(X)
    return replace(ds, X=X, names=tuple(names), fe_mask=np.concatenate(mask))


def check_full_rank(X):
    A = X.T @ X
    try:
        chol_solve(A, np.eye(A.shape[0])[:, :1])
    except NotPositiveDefinite:
        raise RankDeficient("Gram matrix X'X is singular") from None
    # a Cholesky can still succeed on a numerically singular Gram
    d = np.sqrt(np.diag(A))
    d[d == 0] = 1.0
    w = np.linalg.eigvalsh(A / np.outer(d, d))
    if w[0] <= 1e-12 * w[-1]:
        raise RankDeficient("Gram matrix X'X is numerically singular")


_FILTER_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(==|!=|<=|>=|<|>)\s*(.+?)\s*$")
_OPS = {
    "==": np.equal,
    "!=": np.not_equal,
    "<": np.less,
    "<=": np.less_equal,
    ">": np.greater,
    ">=": np.greater_equal,
}


def sample_mask(frame, expr):
    """Evaluate a conjunction of simple comparisons such as
    ``"female==1 & age>=25"`` against a frame of strings."""
    mask = np.ones(len(frame), dtype=bool)
    if expr is None or not expr.strip():
        return mask
    for term in re.split(r"\s*(?:&&?|\band\b)\s*", expr.strip()):
        m = _FILTER_RE.match(term)
        if m is None:
            raise ValueError(f"cannot parse sample condition {term!r}")
        col, op, rhs = m.groups()
        if col not in frame.columns:
            raise MissingColumn(col)
        rhs = rhs.strip("'\"")
        raw = frame[col]
        try:
            value = float(rhs)
            lhs = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=float)
            res = _OPS[op](lhs, value) & ~np.isnan(lhs)
        except ValueError:
            if op not in ("==", "!="):
                raise ValueError(f"ordering comparison needs a number: {term!r}") from None
            res = _OPS[op](raw.to_numpy(dtype=object), rhs)
        mask &= np.asarray(res, dtype=bool)
    return mask


def _numeric(frame, col):
    s = frame[col]
    vals = pd.to_numeric(s, errors="coerce")
    bad = np.flatnonzero(vals.isna().to_numpy() | ~np.isfinite(vals.to_numpy(dtype=float)))
    if len(bad):
        row = int(frame.index[bad[0]]) + 1
        raise ParseError(row, col, s.iloc[bad[0]])
    return vals.to_numpy(dtype=float)


def load_csv(path, y_col, x_cols, g_col, h_col, fe_cols=(), sample=None,
             intercept=None, fe_drop="first"):
    """Read a comma-separated file with a header row.

    ``x_cols[0]`` is the regressor of interest. Numeric columns are parsed
    as floats; cluster and fixed-effect columns are kept as strings. Any
    missing field in a used column is an error (after the ``sample``
    filter). A constant is appended when ``intercept`` is true, which is
    the default only when there are no fixed effects.

    Data rows are numbered from 1 (the header is not counted).
    """
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    frame.columns = [c.strip() for c in frame.columns]
    x_cols = list(x_cols)
    fe_cols = list(fe_cols or ())
    for col in [y_col, *x_cols, g_col, h_col, *fe_cols]:
        if col not in frame.columns:
            raise MissingColumn(col)
    frame.index = np.arange(len(frame))
    if sample:
        frame = frame[sample_mask(frame, sample)]
    if len(frame) == 0:
        raise EmptyData(f"no rows in {path}" + (f" after sample({sample})" if sample else ""))
    for col in [g_col, h_col, *fe_cols]:
        blank = np.flatnonzero(frame[col].str.strip().to_numpy() == "")
        if len(blank):
            raise ParseError(int(frame.index[blank[0]]) + 1, col, "")
    y = _numeric(frame, y_col)
    X = np.column_stack([_numeric(frame, c) for c in x_cols]) if x_cols else np.empty((len(frame), 0))
    names = list(x_cols)
    if intercept is None:
        intercept = not fe_cols
    if intercept:
        X = np.column_stack([X, np.ones(len(frame))])
        names.append("_cons")
    labels = {c: frame[c].str.strip().to_numpy() for c in {g_col, h_col, *fe_cols}}
    ds = Dataset(y=y, X=X, g_labels=labels[g_col], h_labels=labels[h_col],
                 names=tuple(names), coef=0, g_name=g_col, h_name=h_col)
    if fe_cols:
        ds = expand_fixed_effects(ds, FeSpec(tuple(fe_cols), fe_drop), labels)
    else:
        check_full_rank(ds.X)
    return ds


def load_columns(path, cols, sample=None):
    """Raw string columns of ``path`` for the rows kept by ``sample``, aligned
    with the rows returned by ``load_csv`` under the same filter."""
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    frame.columns = [c.strip() for c in frame.columns]
    for col in cols:
        if col not in frame.columns:
            raise MissingColumn(col)
    if sample:
        frame = frame[sample_mask(frame, sample)]
    return {c: frame[c].str.strip().to_numpy() for c in cols}
