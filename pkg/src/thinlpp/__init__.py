"""Directed last-passage percolation on thin rectangular grids.

Simulation of corner-to-corner passage times on n x floor(n**alpha) lattices,
the monotone lo-to-hi flipping coupling, geodesic structure, and Monte Carlo
experiments measuring how central moments of the passage time scale with n.
"""

__version__ = "0.1.0"

from .coupling import (
    CoupledTrajectory,
    IncrementEstimate,
    LipschitzReport,
    WindowI,
    build_trajectory,
    check_reversed_lipschitz,
    evaluate_at_N,
    export_trajectory,
    increment_conditional_mean,
)
from .estimation import (
    ExponentFit,
    MomentEstimate,
    ShapeEstimate,
    WindowStats,
    central_moment,
    empirical_shape,
    fit_exponent,
    shape_function_estimate,
    window_I,
    window_stats,
)
from .experiments import ExperimentRecord, ExperimentSpec, gate_failures, load_spec, run
from .lattice import (
    GeodesicSet,
    GridShape,
    PassageResult,
    WeightGrid,
    apply_flip,
    cylinder_last_passage,
    enumerate_geodesics,
    enumerate_paths_lpp,
    geodesics,
    hi_mode_max,
    last_passage,
    sample_grid,
)
from .weights import WeightModel, make_model

__all__ = [
    "__version__",
    "WeightModel",
    "make_model",
    "GridShape",
    "WeightGrid",
    "PassageResult",
    "GeodesicSet",
    "sample_grid",
    "last_passage",
    "enumerate_paths_lpp",
    "enumerate_geodesics",
    "hi_mode_max",
    "geodesics",
    "cylinder_last_passage",
    "apply_flip",
    "CoupledTrajectory",
    "WindowI",
    "LipschitzReport",
    "IncrementEstimate",
    "build_trajectory",
    "evaluate_at_N",
    "check_reversed_lipschitz",
    "increment_conditional_mean",
    "export_trajectory",
    "MomentEstimate",
    "ExponentFit",
    "WindowStats",
    "ShapeEstimate",
    "central_moment",
    "fit_exponent",
    "window_I",
    "window_stats",
    "shape_function_estimate",
    "empirical_shape",
    "ExperimentSpec",
    "ExperimentRecord",
    "load_spec",
    "run",
    "gate_failures",
]
