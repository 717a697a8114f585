"""Scoring, model comparison, coefficient traces and matrix similarity."""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

from .errors import EpifuseError
from .forecaster import ForecastRecord
from .timeseries import AggregatedPanel


def rmse(pred, obs) -> float:
    """Root mean squared error over date-paired series."""
    pred = np.asarray(pred, dtype=float)
    obs = np.asarray(obs, dtype=float)
    if pred.shape != obs.shape:
        raise EpifuseError("length mismatch between prediction and observation")
    if pred.size == 0:
        raise EpifuseError("empty input")
    return float(np.sqrt(np.mean((pred - obs) ** 2)))


def pearson(pred, obs) -> float | None:
    """Pearson correlation; None when either side has zero variance."""
    pred = np.asarray(pred, dtype=float)
    obs = np.asarray(obs, dtype=float)
    if pred.shape != obs.shape:
        raise EpifuseError("length mismatch between prediction and observation")
    if pred.size < 3:
        raise EpifuseError("need at least 3 paired points")
    a = pred - pred.mean()
    b = obs - obs.mean()
    na = float(np.sqrt(a @ a))
    nb = float(np.sqrt(b @ b))
    if na == 0.0 or nb == 0.0:
        return None
    return float(np.clip((a @ b) / (na * nb), -1.0, 1.0))


def relative_improvement(model_rmse: float, baseline_rmse: float) -> float:
    """baseline / model; above 1 means the model reduced the error."""
    if model_rmse < 0 or baseline_rmse < 0:
        raise EpifuseError("RMSE values must be non-negative")
    if model_rmse == 0.0:
        return 1.0 if baseline_rmse == 0.0 else math.inf
    return baseline_rmse / model_rmse


@dataclass(frozen=True)
class EvalRow:
    region: str
    model: str
    rmse: float
    pearson: float | None
    relative_improvement: float
    n_points: int


def observed_series(panel: AggregatedPanel, region: str) -> dict[dt.date, float]:
    vals = panel.series(region, "confirmed")
    return {
        d: float(v) for d, v in zip(panel.bins, vals) if np.isfinite(v)
    }


def build_eval_report(
    records: list[ForecastRecord],
    panel: AggregatedPanel,
    baseline: str = "persistence",
) -> list[EvalRow]:
    """Per (region, model) scores against observed bins, normalized by the
    baseline model's RMSE on the same region."""
    paired: dict[tuple[str, str], list[tuple[float, float]]] = {}
    for rec in records:
        obs = observed_series(panel, rec.region).get(rec.target_date)
        if obs is None:
            continue
        paired.setdefault((rec.region, rec.model), []).append((rec.estimate, obs))

    base_rmse: dict[str, float] = {}
    for (region, model), pairs in paired.items():
        if model == baseline:
            pred, obs = zip(*pairs)
            base_rmse[region] = rmse(pred, obs)

    rows = []
    for (region, model), pairs in sorted(paired.items()):
        pred, obs = zip(*pairs)
        score = rmse(pred, obs)
        corr = pearson(pred, obs) if len(pairs) >= 3 else None
        rel = (
            relative_improvement(score, base_rmse[region])
            if region in base_rmse
            else math.nan
        )
        rows.append(
            EvalRow(
                region=region,
                model=model,
                rmse=score,
                pearson=corr,
                relative_improvement=rel,
                n_points=len(pairs),
            )
        )
    return rows


@dataclass(frozen=True)
class TraceRow:
    region: str
    feature: str
    as_of: dt.date
    mean_coef: float


def coefficient_traces(
    trace_store: dict[dt.date, list[dict[str, dict[str, float]]]],
    feature_order: tuple[str, ...],
) -> list[TraceRow]:
    """Per-region, per-feature coefficient means over the ensemble runs.

    ``trace_store`` maps each recalibration date to the per-run mapping of
    region to named coefficients. Regions keep the same feature rows in the
    same order at every date.
    """
    rows: list[TraceRow] = []
    for as_of in sorted(trace_store):
        runs = trace_store[as_of]
        regions = sorted({r for run in runs for r in run})
        for region in regions:
            vectors = [run[region] for run in runs if region in run]
            if not vectors:
                continue
            for feature in feature_order:
                values = [v.get(feature, 0.0) for v in vectors]
                if all(v == values[0] for v in values):
                    mean = float(values[0])  # identical runs: exact, no ulp drift
                else:
                    mean = float(np.mean(values))
                rows.append(TraceRow(region, feature, as_of, mean))
    return rows


def matrix_similarity(
    a: np.ndarray, b: np.ndarray, include_diagonal: bool = False
) -> tuple[float, float]:
    """Pearson correlation and cosine similarity of two flattened matrices.

    By default the diagonal is excluded: correlation matrices carry a
    constant unit diagonal that would inflate both scores.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise EpifuseError("matrix dimensions differ")
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise EpifuseError("inputs must be square matrices")
    if include_diagonal:
        va, vb = a.ravel(), b.ravel()
    else:
        mask = ~np.eye(a.shape[0], dtype=bool)
        va, vb = a[mask], b[mask]
    if va.size < 2:
        raise EpifuseError("matrices too small to compare")

    ca = va - va.mean()
    cb = vb - vb.mean()
    denom = float(np.sqrt((ca @ ca) * (cb @ cb)))
    pear = float((ca @ cb) / denom) if denom > 0 else math.nan
    norm = float(np.sqrt((va @ va) * (vb @ vb)))
    cosine = float((va @ vb) / norm) if norm > 0 else math.nan
    return pear, cosine
