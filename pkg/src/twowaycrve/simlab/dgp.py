"""
Simulation configuration, random streams and the two-way factor DGP.
"""

from dataclasses import asdict, dataclass, fields

import numpy as np

from ..dataset import Dataset, _index_from_codes
from ..errors import ConfigError
from .design import allocate_intersections, cluster_sizes, thin_intersections

# stream ids for the counter-based generator
STREAM_Z = 0
STREAM_BINARY = 1
STREAM_U = 2
STREAM_DESIGN = 3


def stream_rng(seed, grid, rep, stream):
    """Independent generator for one (seed, grid point, replication, stream).

    Philox is counter-based, so every key yields its own stream regardless
    of the order in which replications are run.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(grid), int(rep), int(stream)))
    return np.random.Generator(np.random.Philox(ss))


def factor_scale(rho_g, rho_h):
    """(sigma_g, sigma_h, sigma_eps) for the parity factor model."""
    sg2 = rho_g / (1.0 - rho_g)
    sh2 = rho_h / (1.0 - rho_h)
    se2 = 1.0 - sg2 - sh2
    return np.sqrt(sg2), np.sqrt(sh2), np.sqrt(max(se2, 0.0))


@dataclass(frozen=True)
class SimConfig:
    """One simulation design.

    ``binary_scope`` is ``"observation"`` (independent draws per row) or
    ``"intersection"`` (one draw per (g, h) cell). ``empty_frac`` is the
    target share of empty intersections. Without fixed effects a constant
    is included instead.
    """

    G: int = 15
    H: int = 12
    N: int = 10000
    gamma_size_g: float = 2.0
    gamma_size_h: float = 2.0
    rho_g: float = 0.1
    rho_h: float = 0.1
    rho_gx: float = 0.2
    rho_hx: float = 0.2
    p: int = 10
    q: int = 0
    binary_scope: str = "observation"
    binary_prob: float = 0.5
    fe: bool = True
    empty_frac: float = 0.0
    beta1: float = 0.0
    reps: int = 1000
    seed: int = 12345
    level: float = 0.05

    def __post_init__(self):
        for key in ("G", "H"):
            if int(getattr(self, key)) < 2:
                raise ConfigError(key, "need at least 2 clusters")
        if self.N < max(self.G, self.H):
            raise ConfigError("N", "fewer observations than clusters")
        for a, b in (("rho_g", "rho_h"), ("rho_gx", "rho_hx")):
            ra, rb = getattr(self, a), getattr(self, b)
            for key, r in ((a, ra), (b, rb)):
                if not 0.0 <= r < 1.0:
                    raise ConfigError(key, "must lie in [0, 1)")
            if ra / (1 - ra) + rb / (1 - rb) > 1.0 + 1e-12:
                raise ConfigError(f"{a},{b}",
                                  f"{a}/(1-{a}) + {b}/(1-{b}) must not exceed 1 "
                                  "(idiosyncratic variance would be negative)")
        if self.p < 1:
            raise ConfigError("p", "need at least one continuous regressor")
        if self.q < 0:
            raise ConfigError("q", "must be non-negative")
        if self.binary_scope not in ("observation", "intersection"):
            raise ConfigError("binary_scope", "must be 'observation' or 'intersection'")
        if not 0.0 < self.binary_prob < 1.0:
            raise ConfigError("binary_prob", "must lie in (0, 1)")
        if not 0.0 <= self.empty_frac < 1.0:
            raise ConfigError("empty_frac", "must lie in [0, 1)")
        if self.reps < 1:
            raise ConfigError("reps", "need at least one replication")
        if not 0.0 < self.level < 1.0:
            raise ConfigError("level", "must lie in (0, 1)")
        for key in ("gamma_size_g", "gamma_size_h"):
            if getattr(self, key) < 0:
                raise ConfigError(key, "must be non-negative")

    @classmethod
    def keys(cls):
        return tuple(f.name for f in fields(cls))

    @classmethod
    def from_dict(cls, d):
        known = set(cls.keys())
        for key in d:
            if key not in known:
                raise ConfigError(key, "unknown configuration key")
        types = {f.name: f.type for f in fields(cls)}
        conv = {}
        for key, v in d.items():
            t = types[key]
            try:
                if t is int:
                    if isinstance(v, bool) or float(v) != int(v):
                        raise ValueError
                    conv[key] = int(v)
                elif t is float:
                    conv[key] = float(v)
                elif t is bool:
                    if not isinstance(v, bool):
                        raise ValueError
                    conv[key] = v
                else:
                    conv[key] = str(v)
            except (TypeError, ValueError):
                raise ConfigError(key, f"invalid value {v!r}") from None
        return cls(**conv)

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Design:
    """Everything about a simulated sample that does not change across
    replications: the cell sizes, row layout, cluster indices and the
    fixed-effect (or constant) block."""

    M: np.ndarray  # (G, H) cell sizes
    g: np.ndarray  # row -> g code
    h: np.ndarray  # row -> h code
    parity: np.ndarray  # row -> 0/1
    cell: np.ndarray  # row -> intersection code (non-empty cells only)
    cell_rows: np.ndarray  # start of each non-empty cell
    cell_gh: np.ndarray  # (I, 2) parent codes
    D: np.ndarray  # (N, m) fixed-effect dummies or a constant column
    D_names: tuple
    indices: tuple  # ClusterIndex for G, H, I

    @property
    def N(self):
        return len(self.g)

    @property
    def I(self):
        return len(self.cell_rows)


def make_design(cfg, grid=0):
    """Cell sizes (thinned if requested) and row layout for ``cfg``.

    Rows are ordered by g, then h, then position within the cell; the first
    observation of every cell has odd index (parity 0).
    """
    a = cluster_sizes(cfg.N, cfg.G, cfg.gamma_size_g)
    b = cluster_sizes(cfg.N, cfg.H, cfg.gamma_size_h)
    M = allocate_intersections(a, b, cfg.N)
    if cfg.empty_frac > 0:
        M = thin_intersections(M, cfg.empty_frac, stream_rng(cfg.seed, grid, 0, STREAM_DESIGN))
    flat = M.ravel()
    G, H = M.shape
    g = np.repeat(np.repeat(np.arange(G), H), flat)
    h = np.repeat(np.tile(np.arange(H), G), flat)
    nz = np.flatnonzero(flat)
    cell = np.repeat(np.arange(len(nz)), flat[nz])
    starts = np.concatenate([[0], np.cumsum(flat[nz])[:-1]]).astype(np.intp)
    within = np.arange(cfg.N) - starts[cell]
    parity = within % 2
    gh = np.column_stack([nz // H, nz % H]).astype(np.intp)
    if cfg.fe:
        D = np.column_stack([np.eye(G)[g], np.eye(H)[h][:, 1:]])
        names = tuple(f"fe_g{j}" for j in range(G)) + tuple(f"fe_h{j}" for j in range(1, H))
    else:
        D = np.ones((cfg.N, 1))
        names = ("_cons",)
    gi = _index_from_codes("G", g, list(range(G)))
    hi = _index_from_codes("H", h, list(range(H)))
    ii = _index_from_codes("I", cell, [tuple(x) for x in gh.tolist()], gh)
    return Design(M, g, h, parity, cell, starts, gh, D, names, (gi, hi, ii))


def gen_factor(design, rho_g, rho_h, rng, n=1):
    """Draw ``n`` columns of z = s_g xi_g^parity + s_h xi_h^parity + s_e zeta.

    ``design`` may be a Design or a (G, H) cell-size matrix.
    """
    if not isinstance(design, Design):
        M = np.asarray(design, dtype=np.int64)
        flat = M.ravel()
        G, H = M.shape
        g = np.repeat(np.repeat(np.arange(G), H), flat)
        h = np.repeat(np.tile(np.arange(H), G), flat)
        starts = np.concatenate([[0], np.cumsum(flat)[:-1]])
        cellfull = np.repeat(np.arange(G * H), flat)
        parity = (np.arange(len(g)) - starts[cellfull]) % 2
    else:
        M, g, h, parity = design.M, design.g, design.h, design.parity
        G, H = M.shape
    sg, sh, se = factor_scale(rho_g, rho_h)
    N = len(g)
    xg = rng.standard_normal((n, 2, G))
    xh = rng.standard_normal((n, 2, H))
    zeta = rng.standard_normal((n, N))
    z = sg * xg[:, parity, g] + sh * xh[:, parity, h] + se * zeta
    return z.T if n > 1 else z[0]


def gen_binaries(cfg, design, rng):
    if cfg.q == 0:
        return np.empty((design.N, 0))
    if cfg.binary_scope == "observation":
        return (rng.random((design.N, cfg.q)) < cfg.binary_prob).astype(float)
    cellv = (rng.random((design.I, cfg.q)) < cfg.binary_prob).astype(float)
    return cellv[design.cell]


def draw_rep(cfg, design, rep, grid=0):
    """Regressors W = [Z, B] and regressand y for one replication."""
    Z = gen_factor(design, cfg.rho_gx, cfg.rho_hx, stream_rng(cfg.seed, grid, rep, STREAM_Z), cfg.p)
    if Z.ndim == 1:
        Z = Z[:, None]
    B = gen_binaries(cfg, design, stream_rng(cfg.seed, grid, rep, STREAM_BINARY))
    u = gen_factor(design, cfg.rho_g, cfg.rho_h, stream_rng(cfg.seed, grid, rep, STREAM_U))
    y = cfg.beta1 * Z[:, 0] + u
    return np.column_stack([Z, B]), y


def regressor_names(cfg):
    return tuple(f"z{j + 1}" for j in range(cfg.p)) + tuple(f"b{j + 1}" for j in range(cfg.q))


def gen_dataset(cfg, rep, grid=0, design=None):
    """Dataset for replication ``rep``; coefficient of interest is z1."""
    if design is None:
        design = make_design(cfg, grid)
    W, y = draw_rep(cfg, design, rep, grid)
    X = np.column_stack([W, design.D])
    mask = np.concatenate([np.zeros(W.shape[1], bool), np.full(design.D.shape[1], cfg.fe)])
    return Dataset(y=y, X=X, g_labels=design.g, h_labels=design.h,
                   names=regressor_names(cfg) + design.D_names, coef=0, fe_mask=mask)
