"""L1-regularized regression: coordinate-descent solver, path, CV selection."""

from .solver import (
    KERNEL_BACKEND,
    SparseLinearModel,
    fit,
    lambda_grid,
    lambda_path,
    select_lambda_cv,
)

__all__ = [
    "KERNEL_BACKEND",
    "SparseLinearModel",
    "fit",
    "lambda_grid",
    "lambda_path",
    "select_lambda_cv",
]
