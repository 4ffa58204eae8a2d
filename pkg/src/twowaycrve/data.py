"""
Fetch the public NLS young-women panel used in the worked example.
"""

import numpy as np

NLSWORK_COLUMNS = ("idcode", "year", "birth_yr", "age", "race", "vismin", "south",
                   "ind_code", "hours")


def nlswork_frame():
    """The nlswork panel with a visible-minority indicator (race 2 or 3).

    Rows missing any of the model variables are dropped, since the CSV
    loader treats blank fields as errors. Requires the optional
    ``rdatasets`` package.
    """
    try:
        import rdatasets
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise RuntimeError("fetching nlswork needs the 'rdatasets' package "
                           "(pip install rdatasets)") from exc
    df = rdatasets.data("sampleSelection", "nlswork")
    df = df.assign(vismin=np.where(df["race"].isin([2, 3]), 1, 0))
    used = ["hours", "vismin", "south", "age", "birth_yr", "year", "ind_code"]
    df = df.dropna(subset=used)
    out = df[list(NLSWORK_COLUMNS)].copy()
    for col in ("idcode", "year", "birth_yr", "age", "race", "vismin", "south", "ind_code"):
        out[col] = out[col].astype(np.int64)
    return out.reset_index(drop=True)


def fetch_nlswork(path):
    """Write the nlswork extract to ``path`` as CSV and return the row count."""
    df = nlswork_frame()
    df.to_csv(path, index=False)
    return len(df)
