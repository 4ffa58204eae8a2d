"""
Two-way cluster-robust inference for linear regression.

CV1 and jackknife (CV3) cluster-robust variance estimators for data
clustered in two dimensions, with one-way, two-term, three-term,
eigenvalue-repaired and max-se combinations, cluster diagnostics and a
Monte Carlo laboratory.
"""

from .crve import TAGS, VarianceMenu, menu_for_dataset, variance_menu
from .dataset import Dataset, load_csv
from .diagnostics import diag_panel
from .errors import TwoWayError
from .inference import report_for_menu, t_result, wald, w_min
from .ols import fit_ols
from .report import build_report, format_report

__version__ = "0.1.0"

__all__ = [
    "TAGS",
    "Dataset",
    "TwoWayError",
    "VarianceMenu",
    "build_report",
    "diag_panel",
    "fit_ols",
    "format_report",
    "load_csv",
    "menu_for_dataset",
    "report_for_menu",
    "t_result",
    "variance_menu",
    "w_min",
    "wald",
]
