"""Reference models the pipeline is judged against.

* persistence — next bin equals the current bin, no parameters at all.
* ar — per-region ordinary least squares on recent case lags, refit at every
  date on the expanding window.
* argo — the pipeline restricted to one region: exogenous columns and an
  L1 fit, but no cluster pooling and no augmentation.
* argonet — the full pipeline with the mechanistic input switched off,
  run with the same seeds as the augmented variant for paired comparison.
"""

from __future__ import annotations

import dataclasses
import datetime as dt

import numpy as np

from .errors import EpifuseError
from .forecaster import (
    FeatureSpec,
    ForecastRecord,
    PipelineConfig,
    build_design,
    forecast_ensemble,
    persistence_estimate,
    prediction_features,
    target_date_after,
    train_cluster,
)
from .timeseries import AggregatedPanel

MODEL_KINDS = ("persistence", "ar", "argo", "argonet", "augmented")


@dataclasses.dataclass(frozen=True)
class BaselineSpec:
    """Which pipeline stages a model variant activates."""

    kind: str
    features: FeatureSpec = FeatureSpec()
    ar_lags: int = 3

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise EpifuseError(f"unknown model kind {self.kind!r}")


def persistence(panel: AggregatedPanel, as_of: dt.date) -> list[ForecastRecord]:
    """estimate = case count at ``as_of``, for every region."""
    target = target_date_after(panel, as_of)
    records = []
    for region in panel.regions:
        est, flags = persistence_estimate(panel, region, as_of)
        records.append(
            ForecastRecord(
                region=region,
                as_of=as_of,
                target_date=target,
                model="persistence",
                estimate=max(est, 0.0),
                flags=flags,
            )
        )
    return records


def ar_fit_predict(
    panel: AggregatedPanel,
    region: str,
    as_of: dt.date,
    lags: int = 3,
) -> ForecastRecord:
    """Expanding-window OLS on ``lags`` case lags plus an intercept.

    Rank-deficient normal equations get a 1e-8 ridge jitter and a flag.
    Too little history degrades to persistence, flagged.
    """
    target = target_date_after(panel, as_of)
    spec = FeatureSpec(
        n_lags=lags,
        use_search=False,
        use_media=False,
        use_deaths=False,
        use_cumulative=False,
        use_mechanistic=False,
    )
    design = build_design(panel, [region], spec, as_of)
    x_pred, ok = prediction_features(panel, region, spec, as_of)

    def fallback(reason):
        est, pflags = persistence_estimate(panel, region, as_of)
        return ForecastRecord(
            region=region,
            as_of=as_of,
            target_date=target,
            model="ar",
            estimate=max(est, 0.0),
            flags=(reason,) + pflags + ("persistence_fallback",),
        )

    if design.n_rows < lags + 1 or not ok:
        return fallback("insufficient_history")

    A = np.hstack([design.X, np.ones((design.n_rows, 1))])
    AtA = A.T @ A
    Aty = A.T @ design.y
    flags: tuple[str, ...] = ()
    if np.linalg.matrix_rank(AtA) < AtA.shape[0]:
        AtA = AtA + 1e-8 * np.eye(AtA.shape[0])
        flags = ("ridge_jitter",)
    w = np.linalg.solve(AtA, Aty)
    estimate = float(np.concatenate([x_pred, [1.0]]) @ w)
    return ForecastRecord(
        region=region,
        as_of=as_of,
        target_date=target,
        model="ar",
        estimate=max(estimate, 0.0),
        flags=flags,
    )


def argo(
    panel: AggregatedPanel,
    region: str,
    as_of: dt.date,
    spec: FeatureSpec,
    seed: int,
    cfg: PipelineConfig = PipelineConfig(),
) -> tuple[ForecastRecord, dict[str, float] | None]:
    """Single-region L1 fit with exogenous columns; no pooling, no
    augmentation, mechanistic off."""
    target = target_date_after(panel, as_of)
    local_spec = dataclasses.replace(spec, use_mechanistic=False)
    local_cfg = dataclasses.replace(cfg, augment_enabled=False)
    design = build_design(panel, [region], local_spec, as_of)
    cm = train_cluster(design, seed, local_cfg)

    if not cm.fallback:
        x_raw, ok = prediction_features(panel, region, local_spec, as_of)
        if ok:
            return (
                ForecastRecord(
                    region=region,
                    as_of=as_of,
                    target_date=target,
                    model="argo",
                    estimate=max(cm.predict(x_raw), 0.0),
                    flags=(),
                ),
                cm.coefficients(),
            )
        reason = "no_prediction_row"
    else:
        reason = cm.reason
    est, pflags = persistence_estimate(panel, region, as_of)
    return (
        ForecastRecord(
            region=region,
            as_of=as_of,
            target_date=target,
            model="argo",
            estimate=max(est, 0.0),
            flags=(reason,) + pflags + ("persistence_fallback",),
        ),
        None,
    )


def argonet(
    panel: AggregatedPanel,
    as_of: dt.date,
    spec: FeatureSpec,
    base_seed: int,
    runs: int = 20,
    cfg: PipelineConfig = PipelineConfig(),
    jobs: int = 1,
):
    """Full pipeline minus the mechanistic input, seeds paired with the
    augmented variant."""
    return forecast_ensemble(
        panel,
        as_of,
        dataclasses.replace(spec, use_mechanistic=False),
        base_seed,
        runs=runs,
        cfg=cfg,
        model_name="argonet",
        jobs=jobs,
    )


def augmented(
    panel: AggregatedPanel,
    as_of: dt.date,
    spec: FeatureSpec,
    base_seed: int,
    runs: int = 20,
    cfg: PipelineConfig = PipelineConfig(),
    jobs: int = 1,
):
    """Full pipeline including the mechanistic forecast column."""
    return forecast_ensemble(
        panel,
        as_of,
        dataclasses.replace(spec, use_mechanistic=True),
        base_seed,
        runs=runs,
        cfg=cfg,
        model_name="augmented",
        jobs=jobs,
    )
