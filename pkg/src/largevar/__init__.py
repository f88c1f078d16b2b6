"""Penalized large-VAR estimation with universal, per-column and segmentized grouping."""
from .errors import ConfigError, DataError, LargeVarError, SolverError
from .panel import (Panel, StandardizationWeights, LagDesign, apply_transforms, standardize,
                    destandardize, build_lag_design, read_panel_csv)
from .solvers import (LassoProblem, GroupPartition, SolverConfig, SolverResult, solve_lasso,
                      solve_group_lasso, objective, kkt_violation, lambda_max, soft_threshold,
                      canonical_level)
from .estimators import (PenaltySpec, LagDecayMatrix, CoefTensor, FitResult, build_transform,
                         ols_refit, fit_no_grouping, fit_universal, fit_segmentized, fit_var)
from .forecast import (RollingConfig, ForecastReport, HyperGrid, GridResult, forecast_path,
                       forecast_h, benchmark_rw_drift, rolling_evaluate, grid_search)
from .simulation import (SparseVarTruth, PenaltySchedule, RecoveryReport, DependenceDesign,
                         generate_sparse_var, simulate_var, recovery_experiment,
                         dependence_risk_experiment, restricted_eigenvalue)
from .config import RunConfig, parse_config, load_config, format_config

__version__ = "0.1.0"
