"""Grouping regions by trajectory similarity.

Pipeline: Pearson correlation of case trajectories over the training window,
dissimilarity ``d = 1 - r``, complete-linkage agglomeration, and a
Calinski-Harabasz scan over candidate cluster counts. Regions whose case
history is entirely zero inside the window are excluded up front and handled
by the persistence rule downstream.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

from .errors import EpifuseError
from .timeseries import AggregatedPanel

DEFAULT_K_CAP = 10


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric region-by-region Pearson matrix with a validity mask.

    Pairs involving a zero-variance (or partially missing) series are masked
    invalid and stored as 0; the diagonal is 1 by definition.
    """

    regions: tuple[str, ...]
    values: np.ndarray
    valid: np.ndarray


@dataclass(frozen=True)
class Dendrogram:
    """Agglomerative merge history.

    Leaves are 0..n-1; merge ``i`` creates cluster id ``n + i``. Heights are
    non-decreasing (complete linkage is monotone).
    """

    n_leaves: int
    merges: tuple[tuple[int, int, float], ...]


@dataclass(frozen=True)
class ClusterPartition:
    """Assignment of regions to ``k`` non-empty clusters."""

    regions: tuple[str, ...]
    labels: np.ndarray
    k: int
    as_of: dt.date | None = None
    ch_score: float | None = None
    fallback: bool = False  # single-cluster fallback when no feasible k exists

    def members(self, cluster_id: int) -> list[str]:
        return [r for r, g in zip(self.regions, self.labels) if g == cluster_id]

    def clusters(self) -> list[list[str]]:
        return [self.members(g) for g in range(self.k)]


def pairwise_correlation(
    panel: AggregatedPanel,
    signal: str = "confirmed",
    end: dt.date | None = None,
    start: dt.date | None = None,
) -> CorrelationMatrix:
    """Pearson correlation of each region pair over a bin window.

    The window runs from ``start`` to ``end`` inclusive (both default to the
    panel's full range) and must cover at least 3 bins.
    """
    lo = 0 if start is None else panel.bin_index(start)
    hi = panel.n_bins - 1 if end is None else panel.bin_index(end)
    if hi - lo + 1 < 3:
        raise EpifuseError("window too short: need at least 3 bins")
    X = panel.values[signal][:, lo : hi + 1]
    n = X.shape[0]

    finite = np.all(np.isfinite(X), axis=1)
    Xf = np.where(np.isfinite(X), X, 0.0)
    centered = Xf - Xf.mean(axis=1, keepdims=True)
    norms = np.sqrt((centered**2).sum(axis=1))
    ok = finite & (norms > 0)

    safe = np.where(ok, norms, 1.0)
    unit = centered / safe[:, None]
    corr = np.clip(unit @ unit.T, -1.0, 1.0)

    valid = np.outer(ok, ok)
    corr[~valid] = 0.0
    np.fill_diagonal(corr, 1.0)
    np.fill_diagonal(valid, True)
    return CorrelationMatrix(regions=panel.regions, values=corr, valid=valid)


def dissimilarity_from_correlation(corr: CorrelationMatrix) -> np.ndarray:
    """d = 1 - r, on the open interpretation that anticorrelated trajectories
    are maximally dissimilar (not pooled). Masked pairs get the neutral d = 1."""
    d = 1.0 - corr.values
    np.fill_diagonal(d, 0.0)
    return d


def complete_linkage(dissimilarity: np.ndarray) -> Dendrogram:
    """Agglomerate with max-linkage; ties break on the lowest (i, j) id pair."""
    D = np.asarray(dissimilarity, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise EpifuseError("dissimilarity must be a square matrix")
    n = D.shape[0]
    if n < 1:
        raise EpifuseError("empty input")
    if not np.allclose(D, D.T, atol=1e-12):
        raise EpifuseError("dissimilarity must be symmetric")
    if np.any(D < 0):
        raise EpifuseError("dissimilarity must be non-negative")
    if np.any(np.abs(np.diagonal(D)) > 1e-12):
        raise EpifuseError("dissimilarity must have a zero diagonal")

    # Working matrix indexed by cluster id (leaves 0..n-1, merges n..2n-2).
    size = 2 * n - 1
    W = np.full((size, size), np.inf)
    W[:n, :n] = D
    active = list(range(n))
    merges: list[tuple[int, int, float]] = []
    for step in range(n - 1):
        best = (math.inf, -1, -1)
        for a_pos in range(len(active)):
            i = active[a_pos]
            for b_pos in range(a_pos + 1, len(active)):
                j = active[b_pos]
                d = W[i, j]
                if d < best[0]:
                    best = (d, i, j)
        height, i, j = best
        new_id = n + step
        for k in active:
            if k in (i, j):
                continue
            W[new_id, k] = W[k, new_id] = max(W[i, k], W[j, k])
        active.remove(i)
        active.remove(j)
        active.append(new_id)
        merges.append((i, j, float(height)))
    return Dendrogram(n_leaves=n, merges=tuple(merges))


def cut(dendrogram: Dendrogram, k: int) -> list[list[int]]:
    """Undo the last k-1 merges; returns leaf-index clusters ordered by their
    smallest member."""
    n = dendrogram.n_leaves
    if not 1 <= k <= n:
        raise EpifuseError(f"k={k} out of range [1, {n}]")
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    for step in range(n - k):
        i, j, _ = dendrogram.merges[step]
        members[n + step] = members.pop(i) + members.pop(j)
    clusters = [sorted(v) for v in members.values()]
    clusters.sort(key=lambda c: c[0])
    return clusters


def _labels_from_clusters(clusters: list[list[int]], n: int) -> np.ndarray:
    labels = np.empty(n, dtype=int)
    for cid, cluster in enumerate(clusters):
        for leaf in cluster:
            labels[leaf] = cid
    return labels


def calinski_harabasz(features: np.ndarray, labels: np.ndarray) -> float:
    """Variance-ratio cluster validity: [B/(k-1)] / [W/(n-k)].

    B is the size-weighted squared deviation of cluster centroids from the
    global centroid; W the within-cluster squared deviation. Perfectly tight
    clusters (W = 0) score +inf.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    labels = np.asarray(labels)
    n = X.shape[0]
    ids = np.unique(labels)
    k = len(ids)
    if k < 2 or k >= n:
        raise EpifuseError("CH undefined: need 2 <= k < n")
    global_centroid = X.mean(axis=0)
    between = 0.0
    within = 0.0
    for cid in ids:
        pts = X[labels == cid]
        centroid = pts.mean(axis=0)
        between += pts.shape[0] * float(((centroid - global_centroid) ** 2).sum())
        within += float(((pts - centroid) ** 2).sum())
    if within == 0.0:
        return math.inf
    return (between / (k - 1)) / (within / (n - k))


def select_k(
    dendrogram: Dendrogram,
    features: np.ndarray,
    k_range: tuple[int, int] | None = None,
) -> tuple[list[list[int]], int, float, bool]:
    """Cut at the CH-maximizing cluster count.

    Returns ``(clusters, k, ch, fallback)``. The default scan is
    2..min(n-1, 10); ties go to the smaller k. With n <= 2 there is no
    feasible k, so everything lands in one cluster with the fallback flag set.
    """
    n = dendrogram.n_leaves
    lo, hi = k_range if k_range is not None else (2, DEFAULT_K_CAP)
    lo = max(lo, 2)
    hi = min(hi, n - 1)
    if hi < lo:
        return cut(dendrogram, 1), 1, math.nan, True
    best_k, best_ch, best_clusters = None, -math.inf, None
    for k in range(lo, hi + 1):
        clusters = cut(dendrogram, k)
        ch = calinski_harabasz(features, _labels_from_clusters(clusters, n))
        if ch > best_ch:
            best_k, best_ch, best_clusters = k, ch, clusters
    return best_clusters, best_k, best_ch, False


def cluster_regions(
    panel: AggregatedPanel,
    as_of: dt.date,
    signal: str = "confirmed",
    k_range: tuple[int, int] | None = None,
    enabled: bool = True,
    ch_features: str = "correlation_rows",
) -> tuple[ClusterPartition, list[str], Dendrogram | None]:
    """Partition regions at a recalibration date.

    Uses all bins up to ``as_of``. Regions with an all-zero case history in
    that window are excluded (returned separately) and forecast by the
    persistence rule downstream. ``enabled=False`` short-circuits to
    singleton clusters. ``ch_features`` picks the CH embedding: correlation
    matrix rows (default) or the z-scored case series.
    """
    hi = panel.bin_index(as_of)
    X = panel.values[signal][:, : hi + 1]
    nonzero = np.nansum(np.abs(X), axis=1) > 0
    active_idx = [i for i in range(len(panel.regions)) if nonzero[i]]
    excluded = [panel.regions[i] for i in range(len(panel.regions)) if not nonzero[i]]
    active = tuple(panel.regions[i] for i in active_idx)
    n = len(active)

    if n == 0:
        part = ClusterPartition(
            regions=(), labels=np.empty(0, dtype=int), k=0, as_of=as_of,
            ch_score=None, fallback=True,
        )
        return part, excluded, None

    if not enabled:
        part = ClusterPartition(
            regions=active, labels=np.arange(n), k=n, as_of=as_of,
            ch_score=None, fallback=False,
        )
        return part, excluded, None

    if n <= 2 or hi + 1 < 3:
        part = ClusterPartition(
            regions=active, labels=np.zeros(n, dtype=int), k=1, as_of=as_of,
            ch_score=None, fallback=True,
        )
        return part, excluded, None

    sub = AggregatedPanel(
        regions=active,
        bins=panel.bins[: hi + 1],
        values={signal: X[active_idx]},
        window=panel.window,
    )
    corr = pairwise_correlation(sub, signal=signal)
    dend = complete_linkage(dissimilarity_from_correlation(corr))
    if ch_features == "correlation_rows":
        feats = corr.values
    elif ch_features == "zscore_series":
        series = X[active_idx]
        mean = series.mean(axis=1, keepdims=True)
        std = series.std(axis=1, keepdims=True)
        feats = (series - mean) / np.maximum(std, 1e-12)
    else:
        raise EpifuseError(f"unknown ch_features mode {ch_features!r}")
    clusters, k, ch, fallback = select_k(dend, feats, k_range)
    part = ClusterPartition(
        regions=active,
        labels=_labels_from_clusters(clusters, n),
        k=k,
        as_of=as_of,
        ch_score=None if (isinstance(ch, float) and math.isnan(ch)) else ch,
        fallback=fallback,
    )
    return part, excluded, dend
