"""L1-regularized least squares by cyclic coordinate descent.

The objective is the per-row-averaged penalized form

    (1 / 2n) * ||y - X w - b||^2 + lam * ||w||_1

with an unpenalized intercept ``b``. Solutions are computed on centered data
through precomputed Gram products, so one :class:`_CDProblem` can serve an
entire warm-started regularization path at O(p^2) per sweep regardless of the
row count. The inner sweep loop runs in the compiled kernel when available
(see ``KERNEL_BACKEND``) and in a pure-numpy twin otherwise.

Converged fits are certified by their KKT residual: for active coefficients
|(1/n) X_j . r - lam * sign(w_j)| and for inactive ones |(1/n) X_j . r| - lam
must not exceed 10x the coordinate tolerance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import EpifuseError
from ._backend import KERNEL_BACKEND, solve_cd

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 10000


@dataclass(frozen=True)
class SparseLinearModel:
    """Frozen result of one LASSO fit."""

    columns: tuple[str, ...]
    coef: np.ndarray
    intercept: float
    lam: float
    n_iter: int
    converged: bool
    kkt_violation: float
    objective_trace: np.ndarray = field(repr=False, default=None)
    norm_stats: object = None  # NormalizationStats when fitted on z-scored data

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.coef + self.intercept

    def coefficients(self) -> dict[str, float]:
        return {c: float(v) for c, v in zip(self.columns, self.coef)}

    def with_stats(self, stats) -> "SparseLinearModel":
        return SparseLinearModel(
            columns=self.columns,
            coef=self.coef,
            intercept=self.intercept,
            lam=self.lam,
            n_iter=self.n_iter,
            converged=self.converged,
            kkt_violation=self.kkt_violation,
            objective_trace=self.objective_trace,
            norm_stats=stats,
        )

    def to_text(self) -> str:
        """Serialize to plain ``key=value`` lines.

        Coefficients appear as ``coef.<column>=<value>`` in column order;
        floats use shortest-roundtrip repr. Normalization stats and the
        objective trace are fit-time context and are not serialized.
        """
        lines = [
            f"lambda={self.lam!r}",
            f"intercept={self.intercept!r}",
            f"n_iter={self.n_iter}",
            f"converged={'true' if self.converged else 'false'}",
            f"kkt_violation={self.kkt_violation!r}",
        ]
        lines.extend(f"coef.{c}={float(v)!r}" for c, v in zip(self.columns, self.coef))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SparseLinearModel":
        fields: dict[str, str] = {}
        columns: list[str] = []
        coef: list[float] = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            if not _:
                raise EpifuseError(f"malformed model line: {raw!r}")
            if key.startswith("coef."):
                columns.append(key[len("coef."):])
                coef.append(float(value))
            else:
                fields[key] = value
        try:
            return cls(
                columns=tuple(columns),
                coef=np.array(coef),
                intercept=float(fields["intercept"]),
                lam=float(fields["lambda"]),
                n_iter=int(fields["n_iter"]),
                converged=fields["converged"] == "true",
                kkt_violation=float(fields["kkt_violation"]),
            )
        except KeyError as missing:
            raise EpifuseError(f"model text missing field {missing}") from None


class _CDProblem:
    """Centered Gram-form view of one (X, y) training set."""

    def __init__(self, X: np.ndarray, y: np.ndarray):
        X = np.ascontiguousarray(X, dtype=float)
        y = np.ascontiguousarray(y, dtype=float)
        if X.ndim != 2:
            raise ValueError("X must be 2-d")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValueError("y must be 1-d with one entry per row of X")
        if X.shape[0] == 0:
            raise EpifuseError("empty input: no training rows")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise EpifuseError("NaN or infinite value in solver input")
        n = X.shape[0]
        self.n_rows = n
        self.n_features = X.shape[1]
        self.x_mean = X.mean(axis=0)
        self.y_mean = float(y.mean())
        self.G = np.ascontiguousarray(
            X.T @ X / n - np.outer(self.x_mean, self.x_mean)
        )
        self.c = np.ascontiguousarray(X.T @ y / n - self.x_mean * self.y_mean)
        self.y_sq = float(y @ y / n - self.y_mean**2)

    @property
    def lambda_max(self) -> float:
        if self.c.size == 0:
            return 0.0
        return float(np.max(np.abs(self.c)))

    def solve(
        self,
        lam: float,
        w0: np.ndarray | None = None,
        tol: float = DEFAULT_TOL,
        max_iter: int = DEFAULT_MAX_ITER,
        record_objective: bool = False,
    ):
        """Solve at one penalty; returns (w, intercept, n_iter, converged, trace)."""
        if lam < 0:
            raise ValueError("lambda must be non-negative")
        w = np.zeros(self.n_features) if w0 is None else np.array(w0, dtype=float)
        objective = np.empty(max_iter if record_objective else 0)
        n_iter, converged, _ = solve_cd(
            self.G, self.c, self.y_sq, float(lam), float(tol), int(max_iter),
            w, objective, record_objective,
        )
        intercept = self.y_mean - float(self.x_mean @ w)
        trace = objective[:n_iter].copy() if record_objective else objective[:0]
        return w, intercept, n_iter, bool(converged), trace

    def kkt_violation(self, w: np.ndarray, lam: float) -> float:
        """Max violation of the stationarity conditions at ``w``."""
        g = self.c - self.G @ w
        active = w != 0.0
        viol = 0.0
        if np.any(active):
            viol = float(np.max(np.abs(g[active] - lam * np.sign(w[active]))))
        if np.any(~active):
            viol = max(viol, float(np.max(np.abs(g[~active])) - lam))
        return max(viol, 0.0)


def _default_columns(p: int) -> tuple[str, ...]:
    return tuple(f"x{j}" for j in range(p))


def fit(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    columns: tuple[str, ...] | None = None,
    w0: np.ndarray | None = None,
    record_objective: bool = True,
) -> SparseLinearModel:
    """Single LASSO fit. Non-convergence is flagged on the result, not raised."""
    problem = _CDProblem(X, y)
    return _fit_on(problem, lam, tol, max_iter, columns, w0, record_objective)


def _fit_on(
    problem, lam, tol, max_iter, columns=None, w0=None, record_objective=False
) -> SparseLinearModel:
    w, intercept, n_iter, converged, trace = problem.solve(
        lam, w0=w0, tol=tol, max_iter=max_iter, record_objective=record_objective
    )
    if not converged:
        # static message so the default warning filter collapses repeats
        warnings.warn(
            "coordinate descent hit max_iter without converging; result flagged",
            RuntimeWarning,
            stacklevel=2,
        )
    return SparseLinearModel(
        columns=columns or _default_columns(problem.n_features),
        coef=w,
        intercept=intercept,
        lam=float(lam),
        n_iter=n_iter,
        converged=converged,
        kkt_violation=problem.kkt_violation(w, lam),
        objective_trace=trace,
    )


def lambda_grid(lam_max: float, n_lambda: int = 50, ratio: float = 1e-3) -> np.ndarray:
    """Log-spaced penalties from ``lam_max`` down to ``ratio * lam_max``."""
    if n_lambda < 1:
        raise ValueError("n_lambda must be >= 1")
    if lam_max <= 0:
        return np.zeros(n_lambda)
    if n_lambda == 1:
        return np.array([lam_max])
    return np.geomspace(lam_max, ratio * lam_max, n_lambda)


def lambda_path(
    X: np.ndarray,
    y: np.ndarray,
    n_lambda: int = 50,
    ratio: float = 1e-3,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    columns: tuple[str, ...] | None = None,
) -> list[tuple[float, SparseLinearModel]]:
    """Warm-started fits over the full penalty grid, largest first."""
    problem = _CDProblem(X, y)
    grid = lambda_grid(problem.lambda_max, n_lambda, ratio)
    out = []
    w = np.zeros(problem.n_features)
    for lam in grid:
        model = _fit_on(problem, float(lam), tol, max_iter, columns, w0=w)
        w = model.coef
        out.append((float(lam), model))
    return out


def _fold_indices(n: int, folds: int, seed: int, shuffle: bool) -> list[np.ndarray]:
    order = (
        np.random.default_rng(seed).permutation(n) if shuffle else np.arange(n)
    )
    return [fold for fold in np.array_split(order, folds) if fold.size > 0]


def select_lambda_cv(
    X: np.ndarray,
    y: np.ndarray,
    folds: int = 10,
    seed: int = 0,
    n_lambda: int = 50,
    ratio: float = 1e-3,
    shuffle: bool = True,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    columns: tuple[str, ...] | None = None,
) -> tuple[float, SparseLinearModel]:
    """K-fold cross-validated penalty choice, then a refit on all rows.

    Rows are shuffled before splitting (``shuffle=False`` gives contiguous
    time blocks instead). The penalty minimizing mean validation MSE wins;
    ties go to the larger penalty. Deterministic given ``seed``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if n < folds:
        warnings.warn(
            f"only {n} rows for {folds}-fold CV; reducing folds to {n}",
            RuntimeWarning,
            stacklevel=2,
        )
        folds = n
    if n < 2:
        raise EpifuseError("insufficient training rows")

    full = _CDProblem(X, y)
    grid = lambda_grid(full.lambda_max, n_lambda, ratio)
    fold_idx = _fold_indices(n, folds, seed, shuffle)

    # Full-data path first; its solutions double as warm starts for the fold
    # fits (a fold's optimum is a small perturbation of the full one, so this
    # saves most of the sweeps without changing any limit point).
    full_models = []
    w = np.zeros(full.n_features)
    for lam in grid:
        model = _fit_on(full, float(lam), tol, max_iter, columns, w0=w)
        w = model.coef
        full_models.append(model)

    mse = np.zeros((len(fold_idx), len(grid)))
    for f, val in enumerate(fold_idx):
        mask = np.ones(n, dtype=bool)
        mask[val] = False
        sub = _CDProblem(X[mask], y[mask])
        Xv, yv = X[val], y[val]
        for li, lam in enumerate(grid):
            w, intercept, _, _, _ = sub.solve(
                float(lam), w0=full_models[li].coef, tol=tol, max_iter=max_iter
            )
            resid = Xv @ w + intercept - yv
            mse[f, li] = float(resid @ resid) / val.size

    mean_mse = mse.mean(axis=0)
    best = int(np.argmin(mean_mse))  # grid is descending: first min = largest lam
    return float(grid[best]), full_models[best]
