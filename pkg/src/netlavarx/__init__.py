"""Identification of networked latent dynamic systems from multivariate time series.

The toolkit fits per-node dynamic latent variables with autoregressive
dynamics, exogenous inputs, and lagged cross-node interactions; evaluates
one-step predictive performance; selects hyperparameters by chronological grid
search; and exports the latent interaction graph. A built-in synthetic system
generator provides ground truth for verification.
"""

__version__ = "0.1.0"

from .data import (
    NetworkTopology,
    ShiftedMatrices,
    Standardizer,
    TimeSeriesDataset,
    build_augmented,
    build_shifted,
    standardize,
)
from .errors import (
    ConstantColumn,
    DataError,
    DegenerateGeometry,
    DependencyNotReady,
    GenerationFailed,
    GridExhausted,
    InsufficientData,
    InsufficientRank,
    InvalidFormat,
    InvalidInput,
    NetLavarxError,
    ShapeMismatch,
    UnstableSystem,
)
from .estimator import (
    FitSettings,
    NetLavarxModel,
    fit,
    load_model,
    save_model,
)
from .evaluate import MetricsReport, PredictionResult, compute_metrics, evaluate_model, predict_one_step, reconstruct
from .graph import DlvGraph, build_graph, dlv_cross_correlation, export_graph, parse_graph_json, per_dlv_r2
from .numerics import economy_svd, pinv, sym_eig_desc
from .selection import GridSpec, SplitSpec, grid_search, split
from .simulate import (
    GroundTruthSystem,
    Trajectory,
    generate_system,
    oblique_projector,
    principal_angles,
    simulate,
)

__all__ = [
    "__version__",
    "NetworkTopology",
    "TimeSeriesDataset",
    "Standardizer",
    "ShiftedMatrices",
    "standardize",
    "build_shifted",
    "build_augmented",
    "GroundTruthSystem",
    "Trajectory",
    "generate_system",
    "simulate",
    "oblique_projector",
    "principal_angles",
    "FitSettings",
    "NetLavarxModel",
    "fit",
    "save_model",
    "load_model",
    "PredictionResult",
    "MetricsReport",
    "predict_one_step",
    "reconstruct",
    "compute_metrics",
    "evaluate_model",
    "SplitSpec",
    "GridSpec",
    "split",
    "grid_search",
    "DlvGraph",
    "dlv_cross_correlation",
    "per_dlv_r2",
    "build_graph",
    "export_graph",
    "parse_graph_json",
    "economy_svd",
    "sym_eig_desc",
    "pinv",
    "NetLavarxError",
    "InvalidInput",
    "ConstantColumn",
    "InsufficientData",
    "DependencyNotReady",
    "ShapeMismatch",
    "GenerationFailed",
    "UnstableSystem",
    "DegenerateGeometry",
    "InsufficientRank",
    "GridExhausted",
    "InvalidFormat",
    "DataError",
]
