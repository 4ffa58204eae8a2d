"""
Acceptance suite. Every criterion records one PASS/FAIL/SKIP line that is
printed at the end of the pytest run.

The Monte Carlo criteria take several minutes on one core; they are marked
``slow`` and can be deselected with ``-m "not slow"``.
"""

import io
import os
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import record
from helpers import random_dataset
from twowaycrve.cli import main
from twowaycrve.crve import (
    ETA,
    CrveMatrix,
    combine,
    cv1_component,
    cv3_component,
    delete_one_betas,
    eigenfix,
    menu_for_dataset,
)
from twowaycrve.dataset import dataset_indices, load_csv
from twowaycrve.diagnostics import diag_panel
from twowaycrve.inference import w_min
from twowaycrve.numkernel import student_t_pvalue
from twowaycrve.ols import cluster_grams, cluster_scores, fit_ols, modified_scores
from twowaycrve.simlab import SimConfig, cluster_sizes, gen_factor
from twowaycrve.simlab.sweep import FIGURE_TAGS, run_point

C1 = "1 nlswork reproduction"
C2 = "2 jackknife identity oracle"
C3 = "3 base-design rejection bands"
C4 = "4 small-rho negative-variance anchor"
C5 = "5 DGP moment suite"
C6 = "6 property suite"
C7 = "7 tsetse / minimum-wage tables"


def _check(accept, crit, name, value, target, tol):
    ok = bool(abs(value - target) <= tol)
    accept(crit, ok, f"{name}={value:.6g} (target {target}±{tol})")
    return ok


# ---------------------------------------------------------------- criterion 1

NLS_ARGS = ["hours", "vismin", "south", "--cluster", "age", "ind_code",
            "--fevar", "age", "birth_yr", "year", "ind_code",
            "--sample", "age>=25 & age<=35"]


@pytest.fixture(scope="module")
def nlswork_csv(tmp_path_factory):
    try:
        from twowaycrve.data import fetch_nlswork

        path = tmp_path_factory.mktemp("nls") / "nlswork.csv"
        fetch_nlswork(path)
    except Exception as exc:  # no rdatasets or no network
        record(C1, None, f"nlswork unavailable: {type(exc).__name__}")
        pytest.skip("nlswork unavailable")
    return path


def test_c1_nlswork(nlswork_csv, accept):
    out, err = io.StringIO(), io.StringIO()
    t0 = time.perf_counter()
    code = main(["fit", str(nlswork_csv), *NLS_ARGS], out, err)
    elapsed = time.perf_counter() - t0
    assert code == 0, err.getvalue()
    accept(C1, elapsed < 30.0, f"runtime {elapsed:.1f}s (< 30s)")

    rows = {ln.split("|")[0].strip(): ln.split("|")[1].split()
            for ln in out.getvalue().splitlines() if "|" in ln}
    cv1, cv3 = rows["CV1(max)"], rows["CV3(max)"]
    ok = True
    for name, val, target, tol in (
            ("beta", cv1[0], 1.054672, 1e-5),
            ("CV1max se", cv1[1], 0.420220, 1e-4), ("CV1max t", cv1[2], 2.5098, 1e-4),
            ("CV1max p", cv1[3], 0.0309, 1e-3),
            ("CV3max se", cv3[1], 0.521628, 1e-4), ("CV3max t", cv3[2], 2.0219, 1e-4),
            ("CV3max p", cv3[3], 0.0708, 1e-3)):
        ok &= _check(accept, C1, name, float(val), target, tol)

    ds = load_csv(nlswork_csv, "hours", ["vismin", "south"], "age", "ind_code",
                  fe_cols=["age", "birth_yr", "year", "ind_code"],
                  sample="age>=25 & age<=35")
    menu = menu_for_dataset(ds, with_hc=False)
    panel = diag_panel(menu.fit, jackknife=menu.jackknife)
    table = {  # Ng, leverage, partial leverage, beta-no-g, G, G*
        "age": (0.0987, 0.1813, 0.0927, 0.0431, 11, 10.90),
        "ind_code": (1.1815, 0.8823, 1.1849, 0.1565, 12, 5.21),
        "intersect": (1.1507, 0.8925, 1.1557, 0.0173, 132, 56.26),
    }
    for row in panel.rows:
        ref = table[row.name]
        ok &= row.J == ref[4]
        ok &= _check(accept, C1, f"G* {row.name}", row.gstar, ref[5], 0.05)
        for label, val, target in zip(("CV size", "CV leverage", "CV partial", "CV beta"),
                                      (row.cv_size, row.cv_leverage,
                                       row.cv_partial_leverage, row.cv_beta), ref[:4]):
            ok &= _check(accept, C1, f"{label} {row.name}", val, target, 1e-3)
    assert ok and elapsed < 30.0


# ---------------------------------------------------------------- criterion 2

def _rel(a, b):
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def test_c2_jackknife_identities(accept):
    rng = np.random.default_rng(2024)
    worst_score, worst_refit = 0.0, 0.0
    for inst in range(50):
        fe = inst % 5 == 4  # every fifth instance is a TWFE design
        N = int(rng.integers(60, 201))
        G, H = int(rng.integers(3, 7)), int(rng.integers(3, 6))
        p = int(rng.integers(1, 6)) if not fe else int(rng.integers(1, 3))
        ds = random_dataset(rng, N=N, p=p, G=G, H=H, fe=fe)
        fit = fit_ols(ds)
        for idx in dataset_indices(ds):
            b = delete_one_betas(cluster_grams(ds, idx), fit.gram, fit.xty, ginv=fe)
            if not fe:
                V = cv3_component(b, fit.beta).matrix
                S = modified_scores(fit, idx).scores
                ref = (idx.J - 1) / idx.J * fit.gram_inv @ S.T @ S @ fit.gram_inv
                worst_score = max(worst_score, _rel(V, ref))
            for j, rows in enumerate(idx.groups()):
                keep = np.setdiff1d(np.arange(ds.N), rows)
                Xr = ds.X[keep]
                live = np.abs(Xr).sum(axis=0) > 0
                ref = np.zeros(ds.k)
                ref[live] = np.linalg.lstsq(Xr[:, live], ds.y[keep], rcond=None)[0]
                worst_refit = max(worst_refit, _rel(b.betas[j], ref))
    accept(C2, worst_score <= 1e-8, f"score form max rel err {worst_score:.2e} (<= 1e-8)")
    accept(C2, worst_refit <= 1e-8, f"refit max rel err {worst_refit:.2e} (<= 1e-8)")
    assert worst_score <= 1e-8 and worst_refit <= 1e-8


# ---------------------------------------------------------------- criterion 3

@pytest.mark.slow
def test_c3_base_design_bands(accept):
    res = run_point(SimConfig(reps=10000), tags=FIGURE_TAGS)
    r = res.rejection
    checks = [
        ("CV3(3) in [0.04,0.065]", 0.04 <= r["CV3(3)"] <= 0.065, r["CV3(3)"]),
        ("CV3(max) in [0.04,0.065]", 0.04 <= r["CV3(max)"] <= 0.065, r["CV3(max)"]),
        ("CV1(3) > 0.08", r["CV1(3)"] > 0.08, r["CV1(3)"]),
        ("CV3(2) < 0.04", r["CV3(2)"] < 0.04, r["CV3(2)"]),
        ("CV3(3+) < 0.04", r["CV3(3+)"] < 0.04, r["CV3(3+)"]),
        ("CV1(2) <= CV1(3)", r["CV1(2)"] <= r["CV1(3)"], r["CV1(2)"]),
        ("CV3(2) <= CV3(3)", r["CV3(2)"] <= r["CV3(3)"], r["CV3(2)"]),
    ]
    for name, ok, val in checks:
        accept(C3, bool(ok), f"{name}: {val:.4f}")
    assert res.failures == 0
    assert all(ok for _, ok, _ in checks)


# ---------------------------------------------------------------- criterion 4

@pytest.mark.slow
def test_c4_small_rho_anchor(accept):
    res = run_point(SimConfig(p=5, rho_g=0.0, rho_h=0.0, reps=20000), tags=FIGURE_TAGS)
    u1, u3 = res.undefined["CV1(3)"], res.undefined["CV3(3)"]
    ok = [
        _check(accept, C4, "CV1(3) undefined", u1, 0.026, 0.006),
        _check(accept, C4, "CV3(3) undefined", u3, 0.021, 0.006),
    ]
    for tag in ("CV1(2)", "CV3(2)"):
        v = res.rejection[tag]
        accept(C4, v < 0.01, f"{tag} rejection {v:.4f} (< 0.01)")
        ok.append(v < 0.01)
    assert all(ok)


# ---------------------------------------------------------------- criterion 5

def test_c5_factor_moments(accept):
    rho_g, rho_h = 0.3, 0.2
    sg2, sh2 = rho_g / (1 - rho_g), rho_h / (1 - rho_h)
    M = np.full((4, 4), 4)
    z = gen_factor(M, rho_g, rho_h, np.random.default_rng(5), n=200000)
    C = z @ z.T / z.shape[1]
    G, H = M.shape
    g = np.repeat(np.arange(G), 16)
    h = np.tile(np.repeat(np.arange(H), 4), G)
    par = np.tile(np.arange(4) % 2, G * H)
    same_g, same_h, same_p = (g[:, None] == g), (h[:, None] == h), (par[:, None] == par)
    off = ~np.eye(len(g), dtype=bool)
    groups = {
        "same g, other h": (same_g & ~same_h & same_p & off, sg2),
        "same g and h": (same_g & same_h & same_p & off, sg2 + sh2),
        "other g and h": (~same_g & ~same_h, 0.0),
    }
    ok = True
    for name, (mask, target) in groups.items():
        ok &= _check(accept, C5, f"cov {name}", float(C[mask].mean()), target, 0.01)
    ok &= _check(accept, C5, "variance", float(np.diag(C).mean()), 1.0, 0.02)
    a = cluster_sizes(10000, 15, 2.0)
    b = cluster_sizes(10000, 12, 2.0)
    for name, got, want in (("G sizes", (a.min(), a.max()), (223, 1443)),
                            ("H sizes", (b.min(), b.max()), (282, 1769))):
        hit = tuple(int(v) for v in got) == want
        accept(C5, hit, f"{name} range {got[0]}-{got[1]} (target {want[0]}-{want[1]})")
        ok &= hit
    assert ok


# ---------------------------------------------------------------- criterion 6

def test_c6_properties(accept):
    rng = np.random.default_rng(6)
    ok_scores = ok_diff = True
    for seed in range(10):
        ds = random_dataset(rng, fe=seed % 2 == 1)
        fit = fit_ols(ds)
        scale = np.abs(ds.X.T @ ds.y).max()
        comps = []
        for idx in dataset_indices(ds):
            sc = cluster_scores(fit, idx)
            ok_scores &= np.abs(sc.scores.sum(axis=0)).max() <= 1e-8 * scale
            comps.append(cv1_component(fit, sc))
        V2 = combine(*comps, "two-term").matrix
        V3 = combine(*comps, "three-term").matrix
        ok_diff &= np.allclose(V2 - V3, comps[2].matrix, rtol=1e-12, atol=1e-15)
    accept(C6, bool(ok_scores), "score sums vanish per dimension")
    accept(C6, bool(ok_diff), "two-term minus three-term is the intersection term")

    ok_fix = True
    for seed in range(20):
        Q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
        eig = rng.uniform(-1, 1, 4) if seed % 2 else rng.uniform(0.1, 1, 4)
        A = (Q * eig) @ Q.T
        cm = CrveMatrix(A, "CV1", "three-term", np.arange(4))
        out = eigenfix(cm).matrix
        if eig.min() > ETA:
            ok_fix &= np.allclose(out, A, atol=1e-12)
        else:
            ok_fix &= abs(np.linalg.eigvalsh(out).min() - ETA) < 1e-12
        ok_fix &= np.allclose(eigenfix(eigenfix(cm)).matrix, out, atol=1e-12)
    accept(C6, bool(ok_fix), "eigenfix idempotent, floors eigenvalues at eta")

    cases = [((2.0, 3.0, 4.0), (2.0, "three-term")), ((5.0, 3.0, 4.0), (3.0, "G")),
             ((5.0, 6.0, 4.0), (4.0, "H")), ((-1.0, 3.0, 4.0), (0.0, "three-term")),
             ((None, 3.0, 4.0), (0.0, "three-term")), ((3.0, 3.0, 4.0), (3.0, "three-term"))]
    ok_w = all(w_min(*args) == want for args, want in cases)
    # the max-se pick is the component with the smallest positive Wald statistic
    ok_sel = True
    for seed in range(8):
        ds = random_dataset(np.random.default_rng(100 + seed), N=60, G=4, H=4)
        menu = menu_for_dataset(ds)
        b = menu.fit.beta[ds.coef]
        for fam in ("CV1", "CV3"):
            e3, eg, eh = (menu[f"{fam}{s}"] for s in ("(3)", "-G", "-H"))
            W3 = (b / e3.se) ** 2 if e3.defined else None
            wmin, comp = w_min(W3, (b / eg.se) ** 2, (b / eh.se) ** 2)
            m = menu[f"{fam}(max)"]
            if W3 is not None:
                ok_sel &= m.selected == comp and np.isclose((b / m.se) ** 2, wmin)
            else:
                ok_sel &= m.se == max(eg.se, eh.se)
    accept(C6, bool(ok_w and ok_sel), "max-se selection and W_min on enumerated cases")

    ok_t = all(np.isclose(student_t_pvalue(t, 1), 1 - 2 * np.arctan(t) / np.pi, rtol=1e-10)
               for t in (0.2, 1.0, 4.0, 30.0))
    anchor = round(student_t_pvalue(2.5098, 10), 4)
    ok_t &= anchor == 0.0309
    accept(C6, bool(ok_t), f"t p-values: df=1 closed form, anchor p={anchor}")
    assert ok_scores and ok_diff and ok_fix and ok_w and ok_sel and ok_t


# ---------------------------------------------------------------- criterion 7

def test_c7_empirical_tables(accept):
    root = os.environ.get("TWOWAYCRVE_DATA")
    files = ("tsetse.csv", "minwage.csv")
    if not root or not all((Path(root) / f).exists() for f in files):
        accept(C7, None, "data not present (set TWOWAYCRVE_DATA to a directory with "
                         + " and ".join(files) + ")")
        pytest.skip("tsetse / minimum-wage data not present")
    # TODO(data-access): compare against the published p-value columns once the CSVs
    # and their variable layout are available for a local run.
    accept(C7, None, "data present but no table layout configured")
    pytest.skip("table layout for the empirical datasets not configured")
