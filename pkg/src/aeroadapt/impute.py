"""Missing-value imputation via chained per-column linear regressions
(deterministic MICE variant)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

#: Ridge damping applied to the normal equations when X is rank-deficient.
RIDGE_LAMBDA = 1e-6
_COND_LIMIT = 1e12


@dataclass
class MiceConfig:
    n_iterations: int = 10
    convergence_tol: float = 1e-4
    seed: int = 0

    def validate(self) -> None:
        if self.n_iterations < 1:
            raise ValueError("n_iterations must be >= 1")
        if self.convergence_tol <= 0:
            raise ValueError("convergence_tol must be > 0")


@dataclass
class ImputationReport:
    imputed_per_column: dict[str, int]
    iterations_run: int
    final_max_change: float

    def to_dict(self) -> dict:
        return {
            "imputed_per_column": dict(self.imputed_per_column),
            "iterations_run": self.iterations_run,
            "final_max_change": self.final_max_change,
        }


def fit_linear_regressor(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares fit of y on X with an intercept.

    Returns (p+1,) coefficients with the intercept last. Falls back to a
    ridge-damped solve when the normal equations are ill-conditioned.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if n == 0:
        raise ValueError("cannot fit a regressor on zero rows")
    A = np.hstack([X, np.ones((n, 1))])
    gram = A.T @ A
    rhs = A.T @ y
    if np.linalg.cond(gram) > _COND_LIMIT:
        gram = gram + RIDGE_LAMBDA * np.eye(gram.shape[0])
    return np.linalg.solve(gram, rhs)


def _predict(coef: np.ndarray, X: np.ndarray) -> np.ndarray:
    return X @ coef[:-1] + coef[-1]


def mice_impute(matrix: np.ndarray, config: Optional[MiceConfig] = None,
                column_names: Optional[Sequence[str]] = None
                ) -> tuple[np.ndarray, ImputationReport]:
    """Fill NaN cells of a (n, p) matrix by chained column regressions.

    Columns are visited in schema order every iteration; each missing cell is
    re-predicted from all other columns until the largest change drops below
    the tolerance. Observed cells are never modified. Imputed values are
    clipped to the column's observed range widened by 10%.
    """
    config = config or MiceConfig()
    config.validate()
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    n, p = matrix.shape
    names = list(column_names) if column_names is not None else [
        f"col{j}" for j in range(p)]
    mask = np.isnan(matrix)
    for j in range(p):
        if mask[:, j].all():
            raise ValueError(f"column {names[j]!r} has no observed values")

    counts = {names[j]: int(mask[:, j].sum()) for j in range(p)}
    filled = matrix.copy()

    # Column-mean initial fill, plus observed-range clip bounds.
    col_lo = np.empty(p)
    col_hi = np.empty(p)
    for j in range(p):
        observed = matrix[~mask[:, j], j]
        filled[mask[:, j], j] = observed.mean()
        lo, hi = observed.min(), observed.max()
        pad = 0.1 * (hi - lo)
        col_lo[j], col_hi[j] = lo - pad, hi + pad

    if not mask.any():
        return filled, ImputationReport(counts, 0, 0.0)

    iterations = 0
    max_change = np.inf
    for _ in range(config.n_iterations):
        iterations += 1
        max_change = 0.0
        for j in range(p):
            miss = mask[:, j]
            if not miss.any():
                continue
            others = [k for k in range(p) if k != j]
            X_obs = filled[~miss][:, others]
            y_obs = filled[~miss, j]
            coef = fit_linear_regressor(X_obs, y_obs)
            pred = _predict(coef, filled[miss][:, others])
            pred = np.clip(pred, col_lo[j], col_hi[j])
            change = np.abs(pred - filled[miss, j]).max()
            max_change = max(max_change, float(change))
            filled[miss, j] = pred
        if max_change < config.convergence_tol:
            break

    return filled, ImputationReport(counts, iterations, max_change)
