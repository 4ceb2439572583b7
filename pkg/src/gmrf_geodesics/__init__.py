"""Geodesics in the Fisher-metric manifold of pairwise-isotropic
Gaussian-Markov random fields.

The package covers the full pipeline: seeded MCMC simulation of field
outcomes (``lattice``), 3x3 patch covariance statistics (``patches``),
the Fisher metric with its derivatives, Christoffel symbols, entropy and
shape-operator curvature (``geometry``), fixed-step RK4 geodesic
integration with time-reversed replays (``integrator``), and batch
experiment running with CSV/JSON outputs (``experiments``, ``cli``).
"""

from .errors import (
    BatchFormatError,
    GmrfGeodesicsError,
    InvalidDimensionError,
    InvalidParameterError,
    NonFiniteStateError,
    SingularMetricError,
)
from .lattice import (
    NEIGHBOR_COUNT,
    FieldLattice,
    ParamPoint,
    dump_lattice,
    init_field,
    local_conditional_density,
    metropolis_sweep,
    resample_iid,
)
from .patches import (
    CENTER_INDEX,
    PATCH_OFFSETS,
    PatchStats,
    compute_patch_stats,
    dump_patch_covariance,
    patch_covariance,
    patch_matrix,
)
from .geometry import (
    ChristoffelTensor,
    CurvatureReport,
    EntropyValues,
    InverseMetric,
    MetricTensor,
    christoffel_symbols,
    curvature_report,
    entropy,
    inverse_metric,
    metric_derivatives,
    metric_tensor,
)
from .integrator import (
    ChristoffelRefresh,
    DispersionMetrics,
    GeodesicTrace,
    IntegratorConfig,
    Mode,
    TangentVector,
    dispersion_metrics,
    gaussian_christoffels,
    integrate_geodesic,
    load_trace,
    reverse_replay,
    rk4_step,
    save_trace,
)
from .experiments import (
    TABLE1_EXPECTED,
    ExperimentSpec,
    SummaryRow,
    bundled_batch_path,
    emit_plot_series,
    load_batch,
    run_batch,
    run_experiment,
    verify_table1,
)

__version__ = "0.1.0"

__all__ = [
    "BatchFormatError", "GmrfGeodesicsError", "InvalidDimensionError",
    "InvalidParameterError", "NonFiniteStateError", "SingularMetricError",
    "NEIGHBOR_COUNT", "FieldLattice", "ParamPoint", "dump_lattice",
    "init_field", "local_conditional_density", "metropolis_sweep", "resample_iid",
    "CENTER_INDEX", "PATCH_OFFSETS", "PatchStats", "compute_patch_stats",
    "dump_patch_covariance", "patch_covariance", "patch_matrix",
    "ChristoffelTensor", "CurvatureReport", "EntropyValues", "InverseMetric",
    "MetricTensor", "christoffel_symbols", "curvature_report", "entropy",
    "inverse_metric", "metric_derivatives", "metric_tensor",
    "ChristoffelRefresh", "DispersionMetrics", "GeodesicTrace",
    "IntegratorConfig", "Mode", "TangentVector", "dispersion_metrics",
    "gaussian_christoffels", "integrate_geodesic", "load_trace",
    "reverse_replay", "rk4_step", "save_trace",
    "TABLE1_EXPECTED", "ExperimentSpec", "SummaryRow", "bundled_batch_path",
    "emit_plot_series", "load_batch", "run_batch", "run_experiment",
    "verify_table1",
    "__version__",
]
