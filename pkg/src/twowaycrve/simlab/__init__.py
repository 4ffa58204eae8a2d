"""Simulation designs, replication sweeps and placebo audits."""

from .design import allocate_intersections, cluster_sizes, thin_intersections
from .dgp import SimConfig, gen_dataset, gen_factor, make_design, stream_rng
from .sweep import SweepResult, expand_grid, load_config, run_sweep, write_csv

__all__ = [
    "SimConfig",
    "SweepResult",
    "allocate_intersections",
    "cluster_sizes",
    "expand_grid",
    "gen_dataset",
    "gen_factor",
    "load_config",
    "make_design",
    "run_sweep",
    "stream_rng",
    "thin_intersections",
    "write_csv",
]
