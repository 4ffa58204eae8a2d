"""
Fit reports: aligned text tables and machine-readable dumps.
"""

import csv
import io
import json
import math
from dataclasses import dataclass

from .crve import TAGS
from .inference import TestResult

RECORD_KEYS = ("tag", "family", "arity", "coef", "se", "stat", "p", "df", "ci_lo", "ci_hi",
               "defined", "selected_component")


@dataclass(frozen=True)
class FitReport:
    """Everything printed by ``fit``: the coefficient of interest, one test
    row per estimator (in ``TAGS`` order), the diagnostics panel and the
    sample counts."""

    coef_name: str
    coef: float
    rows: tuple  # TestResult
    diag: object  # DiagPanel or None
    meta: dict
    level: float = 0.95


def _fmt(x, digits):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "."
    return f"{x:.{digits}f}"


def format_table(report):
    """Regression table with one line per estimator.

    Coefficients, standard errors and interval bounds have 6 decimals;
    t statistics and p-values have 4. Rows whose variance is not positive
    say ``undefined``.
    """
    lvl = int(round(report.level * 100))
    head = (f"{'s.e.':>9} | {'Coeff':>10} {'Sd. Err.':>10} {'t-stat':>8} {'P value':>8}"
            f" {'CI-lower':>11} {'CI-upper':>11}  {'df':>5}")
    width = len(head)
    lines = [f"Regression Output ({report.coef_name}, {lvl}% CI)", head,
             "-" * 10 + "+" + "-" * (width - 11)]
    for r in report.rows:
        tag = r.tag
        if not r.defined:
            lines.append(f"{tag:>9} | {r.coef:10.6f} {'undefined':>10}")
            continue
        sel = f"  [{r.selected}]" if r.selected else ""
        lines.append(f"{tag:>9} | {r.coef:10.6f} {r.se:10.6f} {r.stat:8.4f} {r.p:8.4f}"
                     f" {r.ci_lo:11.6f} {r.ci_hi:11.6f}  {r.df:>5d}{sel}")
    lines.append("-" * width)
    m = report.meta
    lines.append("N = {N}, k = {k}, p = {p}, G = {G}, H = {H}, I = {I}".format(**m))
    return "\n".join(lines)


def format_diag(panel):
    head = (f"{'dimension':>10} | {'Ng':>8} {'Leverage':>10} {'Partial L.':>11}"
            f" {'beta no g':>11} {'G':>8} {'Gstar':>10}")
    lines = ["Coefficients of Variation, G, and G*", head, "-" * 11 + "+" + "-" * (len(head) - 12)]
    for d in panel.rows:
        lines.append(f"{d.name:>10} | {_fmt(d.cv_size, 4):>8} {_fmt(d.cv_leverage, 4):>10}"
                     f" {_fmt(d.cv_partial_leverage, 4):>11} {_fmt(d.cv_beta, 4):>11}"
                     f" {d.J:>8d} {_fmt(d.gstar, 2):>10}")
    lines.append("-" * len(head))
    return "\n".join(lines)


def format_report(report):
    parts = [format_table(report)]
    if report.diag is not None:
        parts.append(format_diag(report.diag))
    return "\n\n".join(parts) + "\n"


def to_record(r):
    return {"tag": r.tag, "family": r.family, "arity": r.arity, "coef": float(r.coef),
            "se": float(r.se), "stat": float(r.stat), "p": float(r.p), "df": int(r.df),
            "ci_lo": float(r.ci_lo), "ci_hi": float(r.ci_hi), "defined": bool(r.defined),
            "selected_component": r.selected}


def from_record(d):
    fl = {k: float(d[k]) if d[k] is not None else float("nan")
          for k in ("coef", "se", "stat", "p", "ci_lo", "ci_hi")}
    return TestResult(d["tag"], d["family"], d["arity"], fl["coef"], fl["se"], fl["stat"],
                      int(d["df"]), fl["p"], fl["ci_lo"], fl["ci_hi"], bool(d["defined"]),
                      d.get("selected_component") or None)


def _json_num(x):
    # JSON has no NaN; undefined values become null
    return None if isinstance(x, float) and math.isnan(x) else x


def dump_jsonl(rows):
    out = io.StringIO()
    for r in rows:
        rec = {k: _json_num(v) for k, v in to_record(r).items()}
        out.write(json.dumps(rec) + "\n")
    return out.getvalue()


def parse_jsonl(text):
    return [from_record(json.loads(line)) for line in text.splitlines() if line.strip()]


def dump_csv(rows):
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(RECORD_KEYS)
    for r in rows:
        rec = to_record(r)
        # repr keeps every bit of a float
        w.writerow([repr(v) if isinstance(v, float) else
                    ("" if v is None else str(v)) for v in (rec[k] for k in RECORD_KEYS)])
    return out.getvalue()


def parse_csv(text):
    rows = []
    for d in csv.DictReader(io.StringIO(text)):
        d = dict(d)
        d["defined"] = d["defined"] == "True"
        for k in ("coef", "se", "stat", "p", "ci_lo", "ci_hi"):
            d[k] = float(d[k])
        rows.append(from_record(d))
    return rows


def same_rows(a, b):
    """Exact equality of two row lists, treating NaN as equal to NaN."""
    if len(a) != len(b):
        return False
    for x, y in zip(a, b):
        for k in RECORD_KEYS:
            u, v = to_record(x)[k], to_record(y)[k]
            if isinstance(u, float) and isinstance(v, float) and math.isnan(u) and math.isnan(v):
                continue
            if u != v:
                return False
    return True


def ordered_tags():
    """The fixed row order of ``fit`` output."""
    return TAGS


def build_report(ds, level=0.95, null=0.0, diagnostics=True):
    """Fit, compute all sixteen tests for ``ds.coef`` and the diagnostics."""
    from .crve import menu_for_dataset
    from .diagnostics import diag_panel
    from .inference import report_for_menu

    menu = menu_for_dataset(ds)
    rows = tuple(report_for_menu(menu, level, null))
    diag = diag_panel(menu.fit, indices=None, jackknife=menu.jackknife) if diagnostics else None
    return FitReport(ds.names[ds.coef], float(menu.fit.beta[ds.coef]), rows, diag,
                     dict(menu.counts), level)
