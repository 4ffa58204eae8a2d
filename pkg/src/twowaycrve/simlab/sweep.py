"""
Replication sweeps over grids of simulation designs.
"""

import csv
import itertools
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from ..crve import ARITIES, FAMILIES, estimator_tag, variance_menu
from ..dataset import Dataset
from ..errors import ConfigError, TwoWayError
from ..inference import df_for
from ..numkernel import student_t_pvalue, symmetrize
from ..ols import ClusterGrams, fit_ols, sum_grams
from .dgp import SimConfig, draw_rep, make_design, regressor_names

# the eight two-way tests, the default output of a sweep
FIGURE_TAGS = tuple(estimator_tag(f, a) for f in FAMILIES
                    for a in ("two-term", "three-term", "three-plus", "max"))
SIM_TAGS = tuple(estimator_tag(f, a) for f in FAMILIES for a in ARITIES if a != "hc")


def intersection_grams(W, y, design):
    """X_c'X_c and X_c'y_c for X = [W, D], exploiting that the dummy
    block D is constant within every intersection."""
    rows = design.cell_rows
    n = np.diff(np.append(rows, design.N)).astype(float)
    d = design.D[rows]  # (I, m)
    ends = np.append(rows[1:], design.N)
    WW = np.stack([W[a:b].T @ W[a:b] for a, b in zip(rows, ends)])
    Ws = np.add.reduceat(W, rows, axis=0)
    Wy = np.add.reduceat(W * y[:, None], rows, axis=0)
    ys = np.add.reduceat(y, rows)
    I, pw = Ws.shape
    m = d.shape[1]
    xtx = np.empty((I, pw + m, pw + m))
    xtx[:, :pw, :pw] = WW
    cross = Ws[:, :, None] * d[:, None, :]
    xtx[:, :pw, pw:] = cross
    xtx[:, pw:, :pw] = np.swapaxes(cross, 1, 2)
    xtx[:, pw:, pw:] = n[:, None, None] * d[:, :, None] * d[:, None, :]
    xty = np.column_stack([Wy, ys[:, None] * d])
    return ClusterGrams("I", xtx, xty)


@dataclass(frozen=True)
class RepOutcome:
    """Per-estimator p-values (NaN when the variance is not positive)."""

    p: dict
    beta: float


def run_rep(cfg, design, rep, grid=0, tags=SIM_TAGS):
    """Simulate and test one replication. Returns a RepOutcome."""
    W, y = draw_rep(cfg, design, rep, grid)
    X = np.column_stack([W, design.D])
    mask = np.concatenate([np.zeros(W.shape[1], bool), np.full(design.D.shape[1], cfg.fe)])
    ds = Dataset(y=y, X=X, g_labels=design.g, h_labels=design.h,
                 names=regressor_names(cfg) + design.D_names, coef=0, fe_mask=mask)
    gi, hi, ii = design.indices
    gI = intersection_grams(W, y, design)
    grams = (sum_grams(gI, ii, 0, gi.J), sum_grams(gI, ii, 1, hi.J), gI)
    fit = fit_ols(ds, gram=symmetrize(gI.xtx.sum(axis=0)), xty=gI.xty.sum(axis=0))
    menu = variance_menu(fit, 0, indices=design.indices, grams=grams, with_hc=False)
    b = float(fit.beta[0])
    out = {}
    for tag in tags:
        e = menu[tag]
        if e.defined and e.se > 0:
            out[tag] = student_t_pvalue(b / e.se, df_for(e.arity, menu.counts))
        else:
            out[tag] = float("nan")
    return RepOutcome(out, b)


@dataclass(frozen=True)
class SweepResult:
    """Rejection and undefined-variance frequencies at one grid point.

    Replications whose variance estimate is not positive count as
    rejections and are also reported in ``undefined``. Replications that
    raised an estimation error are excluded from both and counted in
    ``failures``.
    """

    grid_index: int
    params: SimConfig
    rejection: dict
    undefined: dict
    reps: int
    failures: int


def _run_chunk(args):
    cfg, grid, reps, tags = args
    design = make_design(cfg, grid)
    P = np.full((len(reps), len(tags)), np.nan)
    failed = np.zeros(len(reps), bool)
    for i, r in enumerate(reps):
        try:
            out = run_rep(cfg, design, r, grid, tags)
        except TwoWayError:
            failed[i] = True
            continue
        P[i] = [out.p[t] for t in tags]
    return P, failed


def _summarize(cfg, grid, P, failed, tags):
    ok = ~failed
    n = int(ok.sum())
    und = np.isnan(P[ok])
    rej = und | (P[ok] < cfg.level)
    denom = max(n, 1)
    return SweepResult(grid, cfg,
                       {t: float(rej[:, j].sum() / denom) for j, t in enumerate(tags)},
                       {t: float(und[:, j].sum() / denom) for j, t in enumerate(tags)},
                       n, int(failed.sum()))


def run_point(cfg, grid=0, threads=1, tags=SIM_TAGS, chunk=None, progress=None):
    """All replications for one design.

    Each replication draws from its own (seed, grid, rep) stream, so the
    result does not depend on ``threads`` or on chunking.
    """
    reps = np.arange(cfg.reps)
    if threads <= 1:
        P, failed = _run_chunk((cfg, grid, reps, tags))
    else:
        chunk = chunk or max(1, int(np.ceil(cfg.reps / (4 * threads))))
        parts = [reps[i:i + chunk] for i in range(0, cfg.reps, chunk)]
        with ProcessPoolExecutor(max_workers=threads) as ex:
            res = list(ex.map(_run_chunk, [(cfg, grid, part, tags) for part in parts]))
        P = np.concatenate([r[0] for r in res])
        failed = np.concatenate([r[1] for r in res])
    if progress is not None:
        progress(grid, cfg)
    return _summarize(cfg, grid, P, failed, tags)


def run_sweep(grid, threads=1, tags=SIM_TAGS, progress=None):
    """Run every SimConfig in ``grid``; grid index i keys the RNG streams."""
    grid = list(grid)
    if not grid:
        raise ValueError("empty grid")
    return [run_point(cfg, i, threads, tags, progress=progress) for i, cfg in enumerate(grid)]


def expand_grid(base, sweep=None):
    """Cartesian product of sweep axes applied to ``base``.

    Keys of ``sweep`` name SimConfig fields. A comma-joined key such as
    ``"gamma_size_g,gamma_size_h"`` moves several fields together; its
    values are scalars (applied to every field) or lists of matching length.
    """
    if isinstance(base, dict):
        base = SimConfig.from_dict(base)
    sweep = sweep or {}
    axes = []
    known = set(SimConfig.keys())
    for key, values in sweep.items():
        names = [k.strip() for k in key.split(",")]
        for nm in names:
            if nm not in known:
                raise ConfigError(nm, "unknown sweep key")
        if not isinstance(values, (list, tuple)) or not values:
            raise ConfigError(key, "sweep values must be a non-empty list")
        pts = []
        for v in values:
            if isinstance(v, (list, tuple)):
                if len(v) != len(names):
                    raise ConfigError(key, f"expected {len(names)} values, got {v!r}")
                pts.append(dict(zip(names, v)))
            else:
                pts.append({nm: v for nm in names})
        axes.append(pts)
    out = []
    for combo in itertools.product(*axes) if axes else [()]:
        d = base.as_dict()
        for part in combo:
            d.update(part)
        out.append(SimConfig.from_dict(d))
    return out


def load_config(path):
    """Read a YAML sweep file with a ``base`` mapping and an optional
    ``sweep`` mapping. Top-level SimConfig keys are merged into ``base``.
    An optional ``estimators`` list restricts the output rows."""
    import yaml

    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("<file>", "top level must be a mapping")
    doc = dict(doc)
    base = dict(doc.pop("base", None) or {})
    sweep = doc.pop("sweep", None) or {}
    tags = doc.pop("estimators", None)
    for key in list(doc):
        base[key] = doc.pop(key)
    if tags is None:
        tags = list(FIGURE_TAGS)
    bad = [t for t in tags if t not in SIM_TAGS]
    if bad:
        raise ConfigError("estimators", f"unknown estimator {bad[0]!r}")
    return expand_grid(base, sweep), tuple(tags)


CSV_FIELDS = ("grid_index",) + SimConfig.keys() + ("estimator", "rejection", "undefined",
                                                   "replications", "failures")


def write_csv(results, fh, tags=None):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for res in results:
        params = res.params.as_dict()
        for tag in tags or res.rejection:
            w.writerow([res.grid_index, *(params[k] for k in SimConfig.keys()), tag,
                        repr(res.rejection[tag]), repr(res.undefined[tag]), res.reps,
                        res.failures])


def stderr_progress(grid, cfg):
    print(f"grid point {grid} done ({cfg.reps} replications)", file=sys.stderr)


def with_reps(grid, reps):
    return [replace(c, reps=int(reps)) for c in grid]
