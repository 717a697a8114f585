"""Daily signal panels, 2-day aggregation, z-scoring and bootstrap augmentation.

A :class:`SignalPanel` holds the raw daily values of every signal for every
region on one contiguous calendar. :func:`aggregate` folds it into
non-overlapping bins anchored at the most recent date, which is the time
resolution every downstream model works at. :func:`zscore_fit` /
:func:`zscore_apply` implement train-window-only normalization, and
:func:`augment` grows a training set by bootstrap resampling with Gaussian
noise.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from .errors import DataValidationError, EpifuseError

# Signals whose bin value is the last daily value instead of the sum.
CUMULATIVE_SIGNALS = frozenset({"cumulative"})

# Constant-column detection threshold for z-scoring; also the denominator
# floor so zero-variance columns never divide by zero.
STD_FLOOR = 1e-12

SEARCH_PREFIX = "search_volume"


def is_search_signal(name: str) -> bool:
    return name == SEARCH_PREFIX or name.startswith(SEARCH_PREFIX + ":")


def _check_calendar(calendar: tuple[dt.date, ...]) -> None:
    if len(calendar) == 0:
        raise DataValidationError("empty input: calendar has no dates")
    one_day = dt.timedelta(days=1)
    for prev, cur in zip(calendar, calendar[1:]):
        if cur == prev:
            raise DataValidationError(f"duplicate date {cur.isoformat()}")
        if cur != prev + one_day:
            raise DataValidationError(f"calendar gap at {cur.isoformat()}")


@dataclass(frozen=True)
class SignalPanel:
    """Daily values of named signals per region.

    ``values[signal]`` is a float array of shape ``(n_regions, n_days)``;
    missing values are NaN. All present values must be non-negative.
    Cumulative monotonicity is *reported* by ingest, not enforced here,
    because unrevised real-time reports do violate it.
    """

    regions: tuple[str, ...]
    calendar: tuple[dt.date, ...]
    values: dict[str, np.ndarray]
    imputed: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        _check_calendar(self.calendar)
        if len(set(self.regions)) != len(self.regions):
            raise DataValidationError("duplicate region identifiers")
        shape = (len(self.regions), len(self.calendar))
        for name, arr in self.values.items():
            if arr.shape != shape:
                raise DataValidationError(
                    f"signal {name!r} has shape {arr.shape}, expected {shape}"
                )
            if np.any(arr[np.isfinite(arr)] < 0):
                raise DataValidationError(f"signal {name!r} contains negative values")

    @property
    def signals(self) -> tuple[str, ...]:
        return tuple(self.values.keys())

    @property
    def n_days(self) -> int:
        return len(self.calendar)

    def region_index(self, region: str) -> int:
        try:
            return self.regions.index(region)
        except ValueError:
            raise KeyError(f"unknown region {region!r}") from None

    def series(self, region: str, signal: str) -> np.ndarray:
        return self.values[signal][self.region_index(region)]

    def cumulative_violations(self) -> list[tuple[str, dt.date]]:
        """(region, date) pairs where the cumulative signal decreases."""
        out: list[tuple[str, dt.date]] = []
        for name in self.values:
            if name not in CUMULATIVE_SIGNALS:
                continue
            arr = self.values[name]
            for r, region in enumerate(self.regions):
                series = arr[r]
                for t in range(1, len(series)):
                    a, b = series[t - 1], series[t]
                    if np.isfinite(a) and np.isfinite(b) and b < a:
                        out.append((region, self.calendar[t]))
        return out


@dataclass(frozen=True)
class AggregatedPanel:
    """A :class:`SignalPanel` folded into fixed-width bins.

    ``bins`` holds each bin's *end* date. Bins are anchored at the panel's
    most recent date and count backward, so the newest bin is always
    complete; leftover days at the oldest end are dropped.
    """

    regions: tuple[str, ...]
    bins: tuple[dt.date, ...]
    values: dict[str, np.ndarray]
    window: int = 2

    @property
    def signals(self) -> tuple[str, ...]:
        return tuple(self.values.keys())

    @property
    def n_bins(self) -> int:
        return len(self.bins)

    def region_index(self, region: str) -> int:
        try:
            return self.regions.index(region)
        except ValueError:
            raise KeyError(f"unknown region {region!r}") from None

    def bin_index(self, date: dt.date) -> int:
        try:
            return self.bins.index(date)
        except ValueError:
            raise EpifuseError(
                f"{date.isoformat()} is not a bin boundary of this panel"
            ) from None

    def series(self, region: str, signal: str) -> np.ndarray:
        return self.values[signal][self.region_index(region)]


def aggregate(panel: SignalPanel, window: int = 2) -> AggregatedPanel:
    """Fold daily values into ``window``-day bins anchored at the last date.

    Flow signals are summed within each bin; cumulative signals take the
    bin-final value. NaN propagates: a bin covering any missing day is
    missing.
    """
    if panel.n_days == 0:
        raise DataValidationError("empty input")
    if window < 1:
        raise ValueError("window must be >= 1")
    if panel.n_days < window:
        raise DataValidationError(
            f"empty input: need at least {window} days, got {panel.n_days}"
        )
    n_bins = panel.n_days // window
    offset = panel.n_days - n_bins * window

    bins = tuple(panel.calendar[offset + (k + 1) * window - 1] for k in range(n_bins))
    out: dict[str, np.ndarray] = {}
    for name, arr in panel.values.items():
        trimmed = arr[:, offset:]
        shaped = trimmed.reshape(arr.shape[0], n_bins, window)
        if name in CUMULATIVE_SIGNALS:
            out[name] = shaped[:, :, -1].copy()
        else:
            out[name] = shaped.sum(axis=2)
    return AggregatedPanel(regions=panel.regions, bins=bins, values=out, window=window)


@dataclass(frozen=True)
class NormalizationStats:
    """Per-column mean and population std frozen from training rows.

    ``std`` is stored unfloored; ``constant`` flags columns whose std fell
    below ``floor``, which normalize to exactly zero.
    """

    columns: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray
    floor: float = STD_FLOOR

    def index(self, column: str) -> int:
        try:
            return self.columns.index(column)
        except ValueError:
            raise KeyError(f"unknown column {column!r}") from None

    def denominator(self) -> np.ndarray:
        return np.maximum(self.std, self.floor)

    def transform_value(self, column: str, x: float) -> float:
        j = self.index(column)
        if self.constant[j]:
            return 0.0
        return (x - self.mean[j]) / max(self.std[j], self.floor)

    def inverse_value(self, column: str, z: float) -> float:
        j = self.index(column)
        if self.constant[j]:
            return float(self.mean[j])
        return float(z * max(self.std[j], self.floor) + self.mean[j])


def zscore_fit(rows: np.ndarray, columns: tuple[str, ...] | list[str]) -> NormalizationStats:
    """Column means and population stds from training rows only."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2:
        raise ValueError("rows must be a 2-d matrix")
    if rows.shape[1] != len(columns):
        raise ValueError("column names do not match matrix width")
    if rows.shape[0] < 2:
        raise EpifuseError("insufficient training rows")
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)  # population (ddof=0)
    constant = std < STD_FLOOR
    return NormalizationStats(
        columns=tuple(columns), mean=mean, std=std, constant=constant
    )


def zscore_apply(
    rows: np.ndarray, columns: tuple[str, ...] | list[str], stats: NormalizationStats
) -> np.ndarray:
    """Normalize ``rows`` with frozen ``stats``; constant columns map to 0."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[1] != len(columns):
        raise ValueError("column names do not match matrix width")
    idx = np.array([stats.index(c) for c in columns])
    denom = stats.denominator()[idx]
    out = (rows - stats.mean[idx]) / denom
    out[:, stats.constant[idx]] = 0.0
    return out


@dataclass(frozen=True)
class AugmentedDataset:
    """Bootstrap-resampled rows with Gaussian noise and their provenance."""

    X: np.ndarray
    y: np.ndarray
    source_index: np.ndarray
    seed: int
    noise_sd: float


def augment(
    X: np.ndarray,
    y: np.ndarray,
    n_bootstrap: int = 100,
    noise_sd: float = 0.01,
    seed: int = 0,
    noise_on_target: bool = True,
) -> AugmentedDataset:
    """Resample ``(X, y)`` rows uniformly with replacement, ``n_bootstrap``
    output rows per source row, adding i.i.d. N(0, noise_sd^2) noise to every
    feature (and, by default, the target).

    Inputs are expected on the z-scored scale: the default noise scale 0.01
    is only meaningful against unit-variance columns. Deterministic given
    ``seed``; the row count is exactly ``n_bootstrap * len(y)``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if n == 0:
        raise EpifuseError("empty input: no rows to augment")
    if y.shape[0] != n:
        raise ValueError("X and y row counts differ")
    if n_bootstrap < 1:
        raise ValueError("n_bootstrap must be >= 1")
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative")

    rng = np.random.default_rng(seed)
    n_out = n_bootstrap * n
    idx = rng.integers(0, n, size=n_out)
    noise = rng.normal(0.0, noise_sd, size=(n_out, X.shape[1] + 1))
    Xa = X[idx] + noise[:, :-1]
    if noise_on_target:
        ya = y[idx] + noise[:, -1]
    else:
        ya = y[idx].copy()
    return AugmentedDataset(
        X=Xa, y=ya, source_index=idx, seed=seed, noise_sd=noise_sd
    )
