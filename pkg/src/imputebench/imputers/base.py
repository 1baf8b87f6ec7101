"""Shared plumbing for the classical imputers.

Each imputer works on the float matrix of non-target columns (categorical
cells as label codes).  :func:`run_imputer` times ``fit`` on the training
partition and ``transform`` on the test partition, then rounds categorical
estimates to the nearest valid code and copies observed cells back verbatim.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import SpecError, UnimputableColumnError
from ..tabular import Dataset

METHODS = ("mean", "knn", "mice", "softimpute", "missforest")
_DEFAULT_ITERS = {"mice": 100, "missforest": 10, "softimpute": 100}


@dataclass(frozen=True)
class ImputerConfig:
    method: str = "mean"
    k: int = 5
    max_iterations: Optional[int] = None
    n_estimators: int = 10
    lambda_grid: Optional[tuple] = None
    convergence_tol: float = 1e-4
    seed: int = 0
    ridge: float = 1e-6
    max_depth: int = 12
    min_samples_leaf: int = 2

    def __post_init__(self):
        if self.method not in METHODS:
            raise SpecError(f"unknown imputation method {self.method!r}")
        if self.k < 1:
            raise SpecError("k must be at least 1")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise SpecError("max_iterations must be at least 1")
        if self.lambda_grid is not None:
            grid = tuple(float(x) for x in self.lambda_grid)
            if not grid or any(b >= a for a, b in zip(grid, grid[1:])) or grid[-1] < 0:
                raise SpecError("lambda_grid must be non-empty, non-negative and strictly descending")
            object.__setattr__(self, "lambda_grid", grid)

    @property
    def iterations(self) -> int:
        return self.max_iterations or _DEFAULT_ITERS.get(self.method, 100)


@dataclass
class ImputationResult:
    completed: Dataset
    fallback: np.ndarray  # True where the cell came from a fallback rule rather than the model
    fit_runtime: float = 0.0
    transform_runtime: float = 0.0
    info: dict = field(default_factory=dict)

    def provenance(self, row: int, col: int) -> str:
        return "fallback" if self.fallback[row, col] else "model"

    @property
    def fallback_count(self) -> int:
        return int(self.fallback.sum())


def categorical_sizes(data: Dataset) -> np.ndarray:
    """Number of categories per feature column, 0 for continuous ones."""
    return np.array([len(data.schema[j].categories) if data.schema[j].is_categorical else 0
                     for j in data.feature_indices], dtype=np.int64)


def column_mode(col: np.ndarray) -> float:
    """Most frequent value of the observed entries; ties go to the smallest."""
    v = col[~np.isnan(col)]
    vals, counts = np.unique(v, return_counts=True)
    return float(vals[np.argmax(counts)])


def column_stats(X: np.ndarray, cats: np.ndarray, names=None) -> np.ndarray:
    """Per-column mean (continuous) or mode (categorical) of observed cells."""
    out = np.empty(X.shape[1])
    for j in range(X.shape[1]):
        col = X[:, j]
        if np.isnan(col).all():
            label = names[j] if names is not None else j
            raise UnimputableColumnError(f"column {label!r} has no observed training value")
        out[j] = column_mode(col) if cats[j] else float(np.nanmean(col))
    return out


def fill_with(X: np.ndarray, values: np.ndarray) -> np.ndarray:
    Z = X.copy()
    r, c = np.nonzero(np.isnan(Z))
    Z[r, c] = values[c]
    return Z


def finalize(data: Dataset, X: np.ndarray, Z: np.ndarray, cats: np.ndarray) -> Dataset:
    """Round categorical estimates to valid codes, keep observed cells, rebuild the dataset."""
    Z = Z.copy()
    for j, c in enumerate(cats):
        if c:
            Z[:, j] = np.clip(np.rint(Z[:, j]), 0, c - 1)
    obs = ~np.isnan(X)
    Z[obs] = X[obs]
    if np.isnan(Z).any():
        raise RuntimeError("imputer left missing cells behind")
    values = data.values.copy()
    values[:, data.feature_indices] = Z
    return data.with_values(values)


def _embed(data: Dataset, sub_mask: np.ndarray) -> np.ndarray:
    full = np.zeros(data.shape, dtype=bool)
    full[:, data.feature_indices] = sub_mask
    return full


def run_imputer(imputer, train: Dataset, test: Optional[Dataset]):
    """Fit on ``train`` and complete both partitions.

    ``imputer`` provides ``fit(X, cats) -> (Z, fallback)`` and
    ``transform(X) -> (Z, fallback)`` over feature matrices.
    """
    if train.n_rows == 0:
        raise ValueError("empty training partition")
    cats = categorical_sizes(train)
    names = [train.schema[j].name for j in train.feature_indices]
    X = train.values[:, train.feature_indices]
    t0 = time.perf_counter()
    Z, fb = imputer.fit(X, cats, names)
    fit_time = time.perf_counter() - t0
    train_res = ImputationResult(finalize(train, X, Z, cats), _embed(train, fb & np.isnan(X)),
                                 fit_runtime=fit_time, info=dict(getattr(imputer, "info", {})))
    if test is None:
        return train_res, None
    if test.schema != train.schema:
        raise ValueError("train and test partitions have different schemas")
    Xt = test.values[:, test.feature_indices]
    t0 = time.perf_counter()
    Zt, fbt = imputer.transform(Xt)
    tr_time = time.perf_counter() - t0
    test_res = ImputationResult(finalize(test, Xt, Zt, cats), _embed(test, fbt & np.isnan(Xt)),
                                fit_runtime=fit_time, transform_runtime=tr_time,
                                info=dict(getattr(imputer, "info", {})))
    return train_res, test_res
