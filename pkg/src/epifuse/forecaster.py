"""Cluster-pooled forecasting pipeline.

Per recalibration date: partition regions by trajectory similarity, stack
each cluster's lag/exogenous rows into one design matrix, z-score on the
training rows, bootstrap-augment, fit an L1 model with cross-validated
penalty, and predict each member's next bin from its own latest feature row.
The whole process is repeated over several seeds and averaged (see
:func:`forecast_ensemble`).

Out-of-sample discipline: every training row targets a bin dated at or
before the recalibration date, and prediction features are normalized with
the frozen training statistics. The one deliberate exception is the
mechanistic column, which carries the mechanistic model's *forecast for the
target bin*: it is indexed by target date but is forecast output, available
ahead of time by construction.
"""

from __future__ import annotations

import datetime as dt
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._rng import derive_seed
from .clustering import ClusterPartition, cluster_regions
from .errors import EpifuseError
from .lasso import SparseLinearModel, select_lambda_cv
from .timeseries import (
    AggregatedPanel,
    NormalizationStats,
    augment,
    is_search_signal,
    zscore_apply,
    zscore_fit,
)

TARGET_COLUMN = "target"


@dataclass(frozen=True)
class FeatureSpec:
    """Which columns enter the design matrix.

    ``n_lags`` autoregressive case lags (lag 0 is the current bin) plus the
    enabled exogenous signals, all taken at the anchor bin; the mechanistic
    column is the forecast for the target bin.
    """

    n_lags: int = 4
    use_search: bool = True
    use_media: bool = True
    use_deaths: bool = True
    use_cumulative: bool = True
    use_mechanistic: bool = False

    def __post_init__(self):
        if self.n_lags < 1:
            raise EpifuseError("FeatureSpec needs at least one lag")


@dataclass(frozen=True)
class PipelineConfig:
    """Training knobs shared by every recalibration date."""

    clustering_enabled: bool = True
    k_range: tuple[int, int] = (2, 10)
    ch_features: str = "correlation_rows"
    augment_enabled: bool = True
    n_bootstrap: int = 100
    noise_sd: float = 0.01
    noise_on_target: bool = True
    cv_folds: int = 10
    cv_shuffle: bool = True
    n_lambda: int = 50
    lambda_ratio: float = 1e-3
    tol: float = 1e-7
    max_iter: int = 10000
    ensemble_runs: int = 20
    ar_lags: int = 3


@dataclass(frozen=True)
class ForecastRecord:
    """One point forecast for one region at one target date."""

    region: str
    as_of: dt.date
    target_date: dt.date
    model: str
    estimate: float
    spread: float = 0.0
    cluster_id: int = -1
    flags: tuple[str, ...] = ()


@dataclass
class DesignMatrix:
    """Stacked training rows for one cluster of regions."""

    columns: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    row_regions: tuple[str, ...]
    target_dates: tuple[dt.date, ...]
    dropped: tuple[str, ...] = ()

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]


def feature_columns(spec: FeatureSpec, panel: AggregatedPanel) -> tuple[str, ...]:
    """Deterministic design-column order for a spec against a panel."""
    cols = [f"cases_lag{i}" for i in range(spec.n_lags)]
    if spec.use_search:
        search = sorted(s for s in panel.signals if is_search_signal(s))
        if not search:
            raise EpifuseError("search features enabled but no search signal present")
        cols.extend(search)
    for flag, signal in (
        (spec.use_media, "media_count"),
        (spec.use_deaths, "deaths"),
        (spec.use_cumulative, "cumulative"),
    ):
        if flag:
            if signal not in panel.signals:
                raise EpifuseError(f"{signal} features enabled but signal missing")
            cols.append(signal)
    if spec.use_mechanistic:
        if "mechanistic_forecast" not in panel.signals:
            raise EpifuseError("mechanistic features enabled but signal missing")
        cols.append("mechanistic")
    return tuple(cols)


def _row_features(
    panel: AggregatedPanel, r: int, t: int, spec: FeatureSpec, columns: tuple[str, ...]
) -> np.ndarray:
    """Feature vector anchored at bin ``t`` (target bin ``t + 1``)."""
    cases = panel.values["confirmed"][r]
    out = np.empty(len(columns))
    pos = 0
    for i in range(spec.n_lags):
        out[pos] = cases[t - i]
        pos += 1
    for col in columns[spec.n_lags :]:
        if col == "mechanistic":
            mech = panel.values["mechanistic_forecast"][r]
            out[pos] = mech[t + 1] if t + 1 < panel.n_bins else np.nan
        else:
            out[pos] = panel.values[col][r, t]
        pos += 1
    return out


def build_design(
    panel: AggregatedPanel,
    regions: list[str] | tuple[str, ...],
    spec: FeatureSpec,
    as_of: dt.date,
) -> DesignMatrix:
    """Stack one row per (region, anchor bin) whose target bin is <= as_of.

    Rows containing missing values are skipped; regions contributing no valid
    row are listed in ``dropped``.
    """
    hi = panel.bin_index(as_of)
    columns = feature_columns(spec, panel)
    rows, targets, row_regions, target_dates = [], [], [], []
    dropped = []
    for region in regions:
        r = panel.region_index(region)
        cases = panel.values["confirmed"][r]
        found = 0
        for t in range(spec.n_lags - 1, hi):
            x = _row_features(panel, r, t, spec, columns)
            y = cases[t + 1]
            if not (np.all(np.isfinite(x)) and np.isfinite(y)):
                continue
            rows.append(x)
            targets.append(y)
            row_regions.append(region)
            target_dates.append(panel.bins[t + 1])
            found += 1
        if found == 0:
            dropped.append(region)
    X = np.array(rows) if rows else np.empty((0, len(columns)))
    y = np.array(targets)
    return DesignMatrix(
        columns=columns,
        X=X,
        y=y,
        row_regions=tuple(row_regions),
        target_dates=tuple(target_dates),
        dropped=tuple(dropped),
    )


def prediction_features(
    panel: AggregatedPanel, region: str, spec: FeatureSpec, as_of: dt.date
) -> tuple[np.ndarray | None, bool]:
    """The feature row predicting the bin after ``as_of`` for one region."""
    hi = panel.bin_index(as_of)
    if hi < spec.n_lags - 1:
        return None, False
    columns = feature_columns(spec, panel)
    x = _row_features(panel, panel.region_index(region), hi, spec, columns)
    if not np.all(np.isfinite(x)):
        return None, False
    return x, True


@dataclass(frozen=True)
class ClusterModel:
    """Trained model for one cluster, or a flagged persistence fallback.

    Constant training columns are excluded from the fit (their coefficients
    are exactly zero); ``kept`` records which design columns survived.
    """

    columns: tuple[str, ...]
    fit_model: SparseLinearModel | None
    stats: NormalizationStats | None
    kept: np.ndarray | None
    fallback: bool
    reason: str = ""

    def coefficients(self) -> dict[str, float]:
        out = {c: 0.0 for c in self.columns}
        if self.fit_model is not None:
            out.update(self.fit_model.coefficients())
        return out

    def predict(self, x_raw: np.ndarray) -> float:
        """De-normalized point prediction from a raw feature row."""
        if self.fallback or self.fit_model is None:
            raise EpifuseError("fallback cluster model cannot predict")
        z = zscore_apply(x_raw[None, :], self.columns, self.stats)[0]
        pred_norm = float(z[self.kept] @ self.fit_model.coef) + self.fit_model.intercept
        return self.stats.inverse_value(TARGET_COLUMN, pred_norm)


def train_cluster(design: DesignMatrix, seed: int, cfg: PipelineConfig) -> ClusterModel:
    """Normalize, augment and fit one cluster's pooled design matrix."""
    if design.n_rows < 2:
        return ClusterModel(design.columns, None, None, None, True, "too_few_rows")
    all_cols = design.columns + (TARGET_COLUMN,)
    M = np.hstack([design.X, design.y[:, None]])
    stats = zscore_fit(M, all_cols)
    if stats.constant[-1]:
        return ClusterModel(design.columns, None, stats, None, True, "constant_target")
    Z = zscore_apply(M, all_cols, stats)
    kept = ~stats.constant[:-1]
    Zx = np.ascontiguousarray(Z[:, :-1][:, kept])
    zy = np.ascontiguousarray(Z[:, -1])
    kept_cols = tuple(c for c, keep in zip(design.columns, kept) if keep)

    if cfg.augment_enabled:
        aug = augment(
            Zx,
            zy,
            n_bootstrap=cfg.n_bootstrap,
            noise_sd=cfg.noise_sd,
            seed=derive_seed(seed, "augment"),
            noise_on_target=cfg.noise_on_target,
        )
        X_fit, y_fit = aug.X, aug.y
    else:
        X_fit, y_fit = Zx, zy

    _, model = select_lambda_cv(
        X_fit,
        y_fit,
        folds=cfg.cv_folds,
        seed=derive_seed(seed, "cv"),
        n_lambda=cfg.n_lambda,
        ratio=cfg.lambda_ratio,
        shuffle=cfg.cv_shuffle,
        tol=cfg.tol,
        max_iter=cfg.max_iter,
        columns=kept_cols,
    )
    return ClusterModel(design.columns, model.with_stats(stats), stats, kept, False)


def persistence_estimate(
    panel: AggregatedPanel, region: str, as_of: dt.date
) -> tuple[float, tuple[str, ...]]:
    """The persistence rule: next bin equals the bin at ``as_of``."""
    value = panel.values["confirmed"][panel.region_index(region), panel.bin_index(as_of)]
    if not np.isfinite(value):
        return 0.0, ("missing_record",)
    return float(value), ()


def target_date_after(panel: AggregatedPanel, as_of: dt.date) -> dt.date:
    """End date of the bin following ``as_of``."""
    hi = panel.bin_index(as_of)
    if hi + 1 < panel.n_bins:
        return panel.bins[hi + 1]
    return as_of + dt.timedelta(days=panel.window)


@dataclass
class SingleRunForecast:
    records: list[ForecastRecord]
    coefs: dict[str, dict[str, float]]
    partition: ClusterPartition
    excluded: list[str]


def forecast_once(
    panel: AggregatedPanel,
    as_of: dt.date,
    spec: FeatureSpec,
    seed: int,
    cfg: PipelineConfig,
    model_name: str = "augmented",
) -> SingleRunForecast:
    """One full cluster-train-predict pass at a single recalibration date."""
    target = target_date_after(panel, as_of)
    partition, excluded, _ = cluster_regions(
        panel,
        as_of,
        k_range=cfg.k_range,
        enabled=cfg.clustering_enabled,
        ch_features=cfg.ch_features,
    )

    by_region: dict[str, ForecastRecord] = {}
    coefs: dict[str, dict[str, float]] = {}

    def fallback_record(region, extra_flags, cluster_id=-1):
        est, flags = persistence_estimate(panel, region, as_of)
        return ForecastRecord(
            region=region,
            as_of=as_of,
            target_date=target,
            model=model_name,
            estimate=max(est, 0.0),
            cluster_id=cluster_id,
            flags=tuple(extra_flags) + flags + ("persistence_fallback",),
        )

    for region in excluded:
        by_region[region] = fallback_record(region, ("excluded_zero_history",))

    for cid in range(partition.k):
        members = partition.members(cid)
        design = build_design(panel, members, spec, as_of)
        cm = train_cluster(design, derive_seed(seed, "cluster", cid), cfg)
        for region in members:
            if cm.fallback:
                by_region[region] = fallback_record(region, (cm.reason,), cid)
                continue
            x_raw, ok = prediction_features(panel, region, spec, as_of)
            if not ok:
                by_region[region] = fallback_record(region, ("no_prediction_row",), cid)
                continue
            by_region[region] = ForecastRecord(
                region=region,
                as_of=as_of,
                target_date=target,
                model=model_name,
                estimate=max(cm.predict(x_raw), 0.0),
                cluster_id=cid,
                flags=(),
            )
            coefs[region] = cm.coefficients()

    records = [by_region[r] for r in panel.regions]
    return SingleRunForecast(records, coefs, partition, excluded)


@dataclass
class EnsembleForecast:
    records: list[ForecastRecord]
    regions: tuple[str, ...]
    per_run_estimates: np.ndarray  # (runs, n_regions)
    per_run_coefs: list[dict[str, dict[str, float]]]
    partition: ClusterPartition
    excluded: list[str]


def forecast_ensemble(
    panel: AggregatedPanel,
    as_of: dt.date,
    spec: FeatureSpec,
    base_seed: int,
    runs: int = 20,
    cfg: PipelineConfig = PipelineConfig(),
    model_name: str = "augmented",
    jobs: int = 1,
) -> EnsembleForecast:
    """Average ``runs`` independent pipeline passes seeded base_seed..+runs-1.

    The reported estimate is the arithmetic mean of the per-run estimates and
    ``spread`` their population standard deviation; per-run coefficient
    vectors are retained for the importance traces.
    """
    if runs < 1:
        raise EpifuseError("ensemble needs at least one run")
    seeds = [base_seed + i for i in range(runs)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            singles = list(
                pool.map(
                    lambda s: forecast_once(panel, as_of, spec, s, cfg, model_name),
                    seeds,
                )
            )
    else:
        singles = [forecast_once(panel, as_of, spec, s, cfg, model_name) for s in seeds]

    first = singles[0]
    estimates = np.array([[rec.estimate for rec in s.records] for s in singles])
    mean = estimates.mean(axis=0)
    spread = estimates.std(axis=0)
    # bit-identical runs must report exactly zero spread (np.std can leak
    # ~1 ulp of rounding from its internal mean)
    spread[np.all(estimates == estimates[0], axis=0)] = 0.0
    records = [
        ForecastRecord(
            region=rec.region,
            as_of=rec.as_of,
            target_date=rec.target_date,
            model=model_name,
            estimate=float(mean[i]),
            spread=float(spread[i]),
            cluster_id=rec.cluster_id,
            flags=rec.flags,
        )
        for i, rec in enumerate(first.records)
    ]
    return EnsembleForecast(
        records=records,
        regions=tuple(rec.region for rec in first.records),
        per_run_estimates=estimates,
        per_run_coefs=[s.coefs for s in singles],
        partition=first.partition,
        excluded=first.excluded,
    )
