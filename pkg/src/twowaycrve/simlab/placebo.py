"""
Placebo-regression audits: append a synthetic regressor whose true
coefficient is zero and count how often each test rejects.
"""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.special import ndtri

from ..crve import TAGS, menu_for_dataset
from ..errors import ConfigError, TwoWayError
from ..inference import df_for
from ..numkernel import student_t_pvalue
from .dgp import stream_rng

PLACEBO_NAME = "placebo"


@dataclass(frozen=True)
class PlaceboSpec:
    """How placebo regressors are drawn.

    ``kind="iid"`` draws standard normals. ``kind="step"`` builds, for each
    unit, a path over sorted time periods that starts at 0 and in each
    later period jumps with probability ``pi`` by ``scale`` times the
    absolute value of a normal draw. Both the jump indicators and the jump
    sizes load on a common per-period factor with weight ``loading``, which
    makes jumps correlated across units.
    """

    kind: str = "step"
    pi: float = 0.15
    scale: float = 1.0
    loading: float = 0.5

    def __post_init__(self):
        if self.kind not in ("iid", "step"):
            raise ConfigError("kind", "must be 'iid' or 'step'")
        if not 0.0 < self.pi < 1.0:
            raise ConfigError("pi", "must lie in (0, 1)")
        if self.scale < 0:
            raise ConfigError("scale", "must be non-negative")
        if not 0.0 <= self.loading <= 1.0:
            raise ConfigError("loading", "must lie in [0, 1]")

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        known = {"kind", "pi", "scale", "loading"}
        for key in d:
            if key not in known:
                raise ConfigError(key, "unknown placebo key")
        try:
            return cls(kind=str(d.get("kind", "step")), pi=float(d.get("pi", 0.15)),
                       scale=float(d.get("scale", 1.0)), loading=float(d.get("loading", 0.5)))
        except (TypeError, ValueError) as exc:
            raise ConfigError("<placebo>", str(exc)) from None


def _time_codes(times):
    """Codes of the sorted distinct periods (numeric order when possible)."""
    t = pd.Series(np.asarray(times))
    num = pd.to_numeric(t, errors="coerce")
    key = num if not num.isna().any() else t.astype(str)
    uniq = np.sort(key.unique())
    return np.searchsorted(uniq, key.to_numpy()), len(uniq)


def draw_placebo(spec, units, times, rng):
    """One placebo column aligned with the rows of ``units``/``times``."""
    n = len(units)
    if spec.kind == "iid":
        return rng.standard_normal(n)
    ucodes, uniq = pd.factorize(np.asarray(units), sort=False)
    U = len(uniq)
    tcodes, T = _time_codes(times)
    a = spec.loading
    b = np.sqrt(1.0 - a * a)
    f = rng.standard_normal(T)[None, :]
    e = rng.standard_normal((U, T))
    jump = (a * f + b * e) > ndtri(1.0 - spec.pi)
    fs = rng.standard_normal(T)[None, :]
    es = rng.standard_normal((U, T))
    size = spec.scale * np.abs(a * fs + b * es)
    step = np.where(jump, size, 0.0)
    step[:, 0] = 0.0
    path = np.cumsum(step, axis=1)
    return path[ucodes, tcodes]


@dataclass
class PlaceboResult:
    """Per-estimator rejection frequencies over successful replications.

    ``undefined`` counts replications with a non-positive variance (these
    also count as rejections); ``failures`` tallies estimation errors by
    type.
    """

    rejection: dict
    undefined: dict
    reps: int
    failures: dict = field(default_factory=dict)

    @property
    def n_failed(self):
        return sum(self.failures.values())


def placebo_run(ds, spec, R, seed=0, units=None, times=None, level=0.05, tags=TAGS):
    """Append a fresh placebo regressor ``R`` times, refit and test it.

    ``units`` defaults to the H cluster labels; ``times`` is required for
    the step generator.
    """
    if int(R) < 1:
        raise ValueError("R must be at least 1")
    if units is None:
        units = ds.h_labels
    if spec.kind == "step" and times is None:
        raise ValueError("the step generator needs a time column")
    rej = {t: 0 for t in tags}
    und = {t: 0 for t in tags}
    failures = {}
    ok = 0
    for r in range(int(R)):
        rng = stream_rng(seed, 0, r, 0)
        x = draw_placebo(spec, units, times, rng)
        try:
            menu = menu_for_dataset(ds.with_column(x, PLACEBO_NAME))
        except TwoWayError as exc:
            name = type(exc).__name__
            failures[name] = failures.get(name, 0) + 1
            continue
        ok += 1
        b = float(menu.fit.beta[menu.coef])
        for tag in tags:
            e = menu[tag]
            if not e.defined or not e.se > 0:
                und[tag] += 1
                rej[tag] += 1
            elif student_t_pvalue(b / e.se, df_for(e.arity, menu.counts)) < level:
                rej[tag] += 1
    denom = max(ok, 1)
    return PlaceboResult({t: rej[t] / denom for t in tags}, {t: und[t] / denom for t in tags},
                         ok, failures)
