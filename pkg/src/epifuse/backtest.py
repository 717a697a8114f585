"""Walk-forward evaluation harness.

Steps over every bin boundary in a date range; at each one, every enabled
model variant forecasts the next bin using only information available at
that date (expanding training window). Forecasts from all models share the
same derived seeds for variance-reduced paired comparison. Per-date model
failures degrade to flagged persistence records instead of aborting.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

from . import baselines
from ._rng import derive_seed
from .clustering import ClusterPartition, cluster_regions
from .errors import DataValidationError, EpifuseError
from .forecaster import FeatureSpec, ForecastRecord, PipelineConfig
from .timeseries import AggregatedPanel

# as_of -> per-run {region -> {feature -> coefficient}}
TraceStore = dict[dt.date, list[dict[str, dict[str, float]]]]


@dataclass
class WalkForwardResult:
    records: list[ForecastRecord] = field(default_factory=list)
    partitions: list[tuple[ClusterPartition, list[str]]] = field(default_factory=list)
    traces: dict[str, TraceStore] = field(default_factory=dict)


def _fallback_records(panel, as_of, model):
    out = []
    for rec in baselines.persistence(panel, as_of):
        out.append(
            ForecastRecord(
                region=rec.region,
                as_of=rec.as_of,
                target_date=rec.target_date,
                model=model,
                estimate=rec.estimate,
                flags=rec.flags + ("model_error", "persistence_fallback"),
            )
        )
    return out


def walk_forward(
    panel: AggregatedPanel,
    start: dt.date,
    end: dt.date,
    spec: FeatureSpec,
    base_seed: int,
    cfg: PipelineConfig = PipelineConfig(),
    models: tuple[str, ...] = baselines.MODEL_KINDS,
    jobs: int = 1,
) -> WalkForwardResult:
    """Run every model at every bin boundary in [start, end]."""
    for m in models:
        if m not in baselines.MODEL_KINDS:
            raise EpifuseError(f"unknown model kind {m!r}")
    lo = panel.bin_index(start)
    hi = panel.bin_index(end)
    if hi < lo:
        raise EpifuseError("backtest end precedes start")

    result = WalkForwardResult()
    result.traces = {m: {} for m in models if m in ("argo", "argonet", "augmented")}

    for t in range(lo, hi + 1):
        as_of = panel.bins[t]
        date_seed = derive_seed(base_seed, "as_of", t)
        partition, excluded, _ = cluster_regions(
            panel,
            as_of,
            k_range=cfg.k_range,
            enabled=cfg.clustering_enabled,
            ch_features=cfg.ch_features,
        )
        result.partitions.append((partition, excluded))

        for model in models:
            try:
                if model == "persistence":
                    result.records.extend(baselines.persistence(panel, as_of))
                elif model == "ar":
                    for region in panel.regions:
                        result.records.append(
                            baselines.ar_fit_predict(panel, region, as_of, cfg.ar_lags)
                        )
                elif model == "argo":
                    run_coefs: dict[str, dict[str, float]] = {}
                    for i, region in enumerate(panel.regions):
                        rec, coefs = baselines.argo(
                            panel, region, as_of, spec,
                            seed=derive_seed(date_seed, "argo", i), cfg=cfg,
                        )
                        result.records.append(rec)
                        if coefs is not None:
                            run_coefs[region] = coefs
                    result.traces["argo"][as_of] = [run_coefs]
                elif model in ("argonet", "augmented"):
                    runner = baselines.argonet if model == "argonet" else baselines.augmented
                    ens = runner(
                        panel, as_of, spec, date_seed,
                        runs=cfg.ensemble_runs, cfg=cfg, jobs=jobs,
                    )
                    result.records.extend(ens.records)
                    result.traces[model][as_of] = ens.per_run_coefs
            except DataValidationError:
                raise
            except EpifuseError:
                result.records.extend(_fallback_records(panel, as_of, model))
    return result
