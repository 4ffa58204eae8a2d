import io
import time

import numpy as np
import pandas as pd
import pytest

from twowaycrve.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from twowaycrve.crve import TAGS
from twowaycrve.report import parse_csv, parse_jsonl, same_rows


@pytest.fixture
def csv_path(tmp_path):
    rng = np.random.default_rng(11)
    N, G, H = 300, 8, 6
    g = rng.integers(0, G, N)
    h = rng.integers(0, H, N)
    g[:G], h[:H] = np.arange(G), np.arange(H)
    x = rng.standard_normal(N) + 0.5 * rng.standard_normal(G)[g]
    w = rng.standard_normal(N)
    y = 0.3 * x + w + rng.standard_normal(N) + rng.standard_normal(H)[h]
    frame = pd.DataFrame({"y": y, "x": x, "w": w, "state": [f"s{v}" for v in g],
                          "year": 2000 + h, "age": rng.integers(20, 40, N)})
    p = tmp_path / "d.csv"
    frame.to_csv(p, index=False)
    return p


def _run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


def test_fit_prints_all_rows_in_order(csv_path):
    code, out, err = _run(["fit", csv_path, "y", "x", "w", "--cluster", "state", "year"])
    assert code == EXIT_OK, err
    lines = out.splitlines()
    assert lines[0] == "Regression Output (x, 95% CI)"
    tags = [ln.split("|")[0].strip() for ln in lines[3:3 + len(TAGS)]]
    assert tags == list(TAGS)
    assert "Coefficients of Variation, G, and G*" in out


def test_fit_flag_form_matches_varlist(csv_path):
    a = _run(["fit", csv_path, "y", "x", "w", "--cluster", "state", "year"])[1]
    b = _run(["fit", csv_path, "--y", "y", "--x", "x", "--controls", "w",
              "--cluster", "state", "year"])[1]
    assert a == b


def test_one_cluster_variable_is_usage_error(csv_path):
    code, _, err = _run(["fit", csv_path, "y", "x", "--cluster", "state"])
    assert code == EXIT_USAGE
    assert "exactly two" in err


def test_missing_command_and_unknown_flag():
    assert _run([])[0] == EXIT_USAGE
    assert _run(["fit", "x.csv", "--bogus"])[0] == EXIT_USAGE


def test_missing_file_is_runtime_error(tmp_path):
    code, _, err = _run(["fit", tmp_path / "nope.csv", "y", "x", "--cluster", "a", "b"])
    assert code == EXIT_RUNTIME
    assert "load failed" in err


def test_missing_column_is_runtime_error(csv_path):
    code, _, err = _run(["fit", csv_path, "y", "zz", "--cluster", "state", "year"])
    assert code == EXIT_RUNTIME
    assert "MissingColumn" in err


@pytest.mark.parametrize("fmt,parse", [("jsonl", parse_jsonl), ("csv", parse_csv)])
def test_dump_round_trip_is_exact(csv_path, tmp_path, fmt, parse):
    from twowaycrve.dataset import load_csv
    from twowaycrve.report import build_report

    out = tmp_path / f"r.{fmt}"
    code, _, err = _run(["fit", csv_path, "y", "x", "w", "--cluster", "state", "year",
                         "--format", fmt, "--output", out])
    assert code == EXIT_OK, err
    rows = parse(out.read_text())
    ref = build_report(load_csv(csv_path, "y", ["x", "w"], "state", "year"),
                       diagnostics=False).rows
    assert [r.tag for r in rows] == list(TAGS)
    assert same_rows(rows, ref)


def test_sample_filter_changes_n(csv_path):
    full = _run(["fit", csv_path, "y", "x", "--cluster", "state", "year", "--no-diag"])[1]
    sub = _run(["fit", csv_path, "y", "x", "--cluster", "state", "year", "--no-diag",
                "--sample", "age>=25 & age<=35"])[1]
    n_sub = int((pd.read_csv(csv_path)["age"].between(25, 35)).sum())
    assert "N = 300" in full
    assert f"N = {n_sub}" in sub


def test_level_accepts_percent(csv_path):
    out = _run(["fit", csv_path, "y", "x", "--cluster", "state", "year", "--no-diag",
                "--level", "90"])[1]
    assert out.splitlines()[0] == "Regression Output (x, 90% CI)"


def test_diagnose(csv_path):
    code, out, _ = _run(["diagnose", csv_path, "y", "x", "w", "--cluster", "state", "year"])
    assert code == EXIT_OK
    assert out.startswith("Coefficients of Variation, G, and G*")
    assert "intersect" in out


def test_fixed_effects_flag(csv_path):
    code, out, err = _run(["fit", csv_path, "y", "x", "--cluster", "state", "year",
                           "--fevar", "state", "year", "--no-diag"])
    assert code == EXIT_OK, err
    assert "k = 14" in out  # x, 8 state dummies, 5 year dummies


def _config(tmp_path, text):
    p = tmp_path / "c.yaml"
    p.write_text(text)
    return p


def test_simulate_smoke_on_base_design(tmp_path):
    cfg = _config(tmp_path, "base: {G: 15, H: 12, N: 10000, p: 10, reps: 1}\n")
    t0 = time.perf_counter()
    code, out, err = _run(["simulate", cfg])
    assert code == EXIT_OK, err
    assert time.perf_counter() - t0 < 5.0
    lines = out.strip().splitlines()
    assert lines[0].startswith("grid_index,")
    assert len(lines) == 1 + 8


def test_simulate_invalid_rho_names_constraint(tmp_path):
    cfg = _config(tmp_path, "base: {rho_g: 0.6, rho_h: 0.6}\n")
    code, _, err = _run(["simulate", cfg])
    assert code == EXIT_USAGE
    assert "rho_g,rho_h" in err


def test_simulate_unknown_key(tmp_path):
    cfg = _config(tmp_path, "base: {G: 5, colour: 3}\n")
    code, _, err = _run(["simulate", cfg])
    assert code == EXIT_USAGE and "colour" in err


def test_placebo_rejects_zero_reps(csv_path):
    code, _, err = _run(["placebo", csv_path, "y", "x", "--cluster", "state", "year",
                         "--kind", "iid", "--reps", "0"])
    assert code == EXIT_USAGE


def test_placebo_step_needs_time(csv_path):
    code, _, err = _run(["placebo", csv_path, "y", "x", "--cluster", "state", "year",
                         "--kind", "step", "--reps", "3"])
    assert code == EXIT_USAGE and "--time" in err


def test_placebo_runs(csv_path, tmp_path):
    out = tmp_path / "p.csv"
    code, text, err = _run(["placebo", csv_path, "y", "x", "--cluster", "state", "year",
                            "--kind", "step", "--time", "year", "--unit", "state",
                            "--reps", "5", "--format", "csv", "--output", out])
    assert code == EXIT_OK, err
    assert "5 draws" in text
    body = out.read_text().splitlines()
    assert body[0] == "tag,rejection,undefined,reps"
    assert len(body) == 1 + len(TAGS)
