"""
Hours worked and minority status in the NLS young-women panel.

Fetches the public extract, fits hours on a visible-minority indicator
with age, birth-year, year and industry fixed effects, and clusters by
age and industry. Run from the repository root:

    python demos/01_nlswork_walkthrough.py [path/to/nlswork.csv]
"""

import sys
import tempfile
from pathlib import Path

from twowaycrve import build_report, format_report, load_csv
from twowaycrve.data import fetch_nlswork

# %% Data: download once, or reuse a CSV given on the command line
if len(sys.argv) > 1:
    path = Path(sys.argv[1])
else:
    path = Path(tempfile.gettempdir()) / "nlswork.csv"
    if not path.exists():
        print(f"fetching nlswork to {path}")
        fetch_nlswork(path)

ds = load_csv(path, "hours", ["vismin", "south"], "age", "ind_code",
              fe_cols=["age", "birth_yr", "year", "ind_code"],
              sample="age>=25 & age<=35")
print(f"N = {ds.N}, k = {ds.k} ({int((~ds.fe_mask).sum())} ordinary regressors)")

# %% All sixteen tests for the coefficient on vismin
report = build_report(ds)
print(format_report(report))

# %% Reading the table
# There are only 11 age clusters and 12 industries, so every two-way test
# uses t(10). Industry sizes are very unequal (CV of N_g above 1) and G*
# for industry is near 5: few clusters carry most of the information.
# The jackknife max-se interval is wider than the CV1 one and covers zero.
rows = {r.tag: r for r in report.rows}
for tag in ("CV1-H", "CV1(max)", "CV3(max)"):
    r = rows[tag]
    print(f"{tag:>9}: se {r.se:.6f}  p {r.p:.4f}  picked {r.selected or '-'}")
