"""epifuse: short-horizon epidemic case-count forecasting.

Fuses official case reports, search-trend and media signals, and
mechanistic-model output through dynamic region clustering, bootstrap data
augmentation and L1-regularized regression, with a walk-forward backtesting
harness and reference baselines.
"""

from .backtest import WalkForwardResult, walk_forward
from .clustering import (
    ClusterPartition,
    CorrelationMatrix,
    Dendrogram,
    calinski_harabasz,
    complete_linkage,
    cut,
    pairwise_correlation,
    select_k,
)
from .errors import CalibrationError, ConfigError, DataValidationError, EpifuseError
from .forecaster import (
    DesignMatrix,
    FeatureSpec,
    ForecastRecord,
    PipelineConfig,
    build_design,
    forecast_ensemble,
    forecast_once,
    train_cluster,
)
from .lasso import KERNEL_BACKEND, SparseLinearModel, fit, lambda_path, select_lambda_cv
from .timeseries import (
    AggregatedPanel,
    AugmentedDataset,
    NormalizationStats,
    SignalPanel,
    aggregate,
    augment,
    zscore_apply,
    zscore_fit,
)

__version__ = "0.1.0"

__all__ = [
    "AggregatedPanel",
    "AugmentedDataset",
    "CalibrationError",
    "ClusterPartition",
    "ConfigError",
    "CorrelationMatrix",
    "DataValidationError",
    "Dendrogram",
    "DesignMatrix",
    "EpifuseError",
    "FeatureSpec",
    "ForecastRecord",
    "KERNEL_BACKEND",
    "NormalizationStats",
    "PipelineConfig",
    "SignalPanel",
    "SparseLinearModel",
    "WalkForwardResult",
    "aggregate",
    "augment",
    "build_design",
    "calinski_harabasz",
    "complete_linkage",
    "cut",
    "fit",
    "forecast_ensemble",
    "forecast_once",
    "lambda_path",
    "pairwise_correlation",
    "select_k",
    "select_lambda_cv",
    "train_cluster",
    "walk_forward",
    "zscore_apply",
    "zscore_fit",
    "__version__",
]
