import numpy as np

from twowaycrve.dataset import Dataset


def random_dataset(rng, N=120, p=3, G=6, H=5, fe=False, coef=0):
    """Random two-way clustered data; with ``fe`` the design is
    [Z, G dummies, H dummies minus the first]."""
    g = rng.integers(0, G, N)
    h = rng.integers(0, H, N)
    # make sure every level appears
    g[:G] = np.arange(G)
    h[:H] = np.arange(H)
    Z = rng.standard_normal((N, p)) + 0.5 * rng.standard_normal(G)[g][:, None]
    y = Z @ rng.standard_normal(p) + rng.standard_normal(N) + rng.standard_normal(H)[h]
    if fe:
        D = np.column_stack([np.eye(G)[g], np.eye(H)[h][:, 1:]])
        X = np.column_stack([Z, D])
        mask = np.r_[np.zeros(p, bool), np.ones(D.shape[1], bool)]
    else:
        X = np.column_stack([Z, np.ones(N)])
        mask = np.zeros(p + 1, bool)
    names = tuple(f"x{j}" for j in range(X.shape[1]))
    return Dataset(y, X, g, h, names, coef=coef, fe_mask=mask)
