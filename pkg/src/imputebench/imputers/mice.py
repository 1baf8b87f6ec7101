"""Chained-equation imputation with damped least-squares regressors."""

from __future__ import annotations

import numpy as np

from .base import column_stats, fill_with


def ridge_fit(A: np.ndarray, y: np.ndarray, damping: float):
    """Coefficients of y ~ [A, 1] under (A'A + damping*I) damping; None when unsolvable."""
    D = np.column_stack([A, np.ones(A.shape[0])])
    G = D.T @ D + damping * np.eye(D.shape[1])
    try:
        beta = np.linalg.solve(G, D.T @ y)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(beta)):
        return None
    return beta


def _predict(beta, A):
    return A @ beta[:-1] + beta[-1]


class MICEImputer:
    def __init__(self, cfg):
        self.max_iter = cfg.iterations
        self.tol = cfg.convergence_tol
        self.damping = cfg.ridge
        self.info = {}

    def _others(self, j):
        return [c for c in range(self.p) if c != j]

    def _fit_column(self, Z, obs, j):
        rows = obs[:, j]
        return ridge_fit(Z[rows][:, self._others(j)], Z[rows, j], self.damping)

    def fit(self, X, cats, names=None):
        n, self.p = X.shape
        obs = ~np.isnan(X)
        self.means_ = column_stats(X, np.zeros_like(cats), names)
        Z = fill_with(X, self.means_)
        fb = np.zeros(X.shape, dtype=bool)
        targets = [j for j in range(self.p) if not obs[:, j].all()]
        trace = []
        converged = not targets
        if self.p >= 2:
            for _ in range(self.max_iter if targets else 0):
                change = 0.0
                for j in targets:
                    miss = ~obs[:, j]
                    beta = self._fit_column(Z, obs, j)
                    if beta is None:
                        pred = np.full(miss.sum(), self.means_[j])
                        fb[miss, j] = True
                    else:
                        pred = _predict(beta, Z[miss][:, self._others(j)])
                        fb[miss, j] = False
                    change = max(change, float(np.max(np.abs(pred - Z[miss, j]))))
                    Z[miss, j] = pred
                trace.append(change)
                if change < self.tol:
                    converged = True
                    break
            self.betas_ = [self._fit_column(Z, obs, j) for j in range(self.p)]
        else:
            fb[~obs] = True
            self.betas_ = [None]
        self.info = {"iterations": len(trace), "converged": converged, "trace": trace,
                     "fallback_columns": [j for j in range(self.p) if self.betas_[j] is None]}
        return Z, fb

    def transform(self, X):
        obs = ~np.isnan(X)
        Z = fill_with(X, self.means_)
        fb = np.zeros(X.shape, dtype=bool)
        targets = [j for j in range(self.p) if not obs[:, j].all()]
        for j in targets:
            if self.betas_[j] is None:
                fb[~obs[:, j], j] = True
        active = [j for j in targets if self.betas_[j] is not None]
        for _ in range(self.max_iter if active else 0):
            change = 0.0
            for j in active:
                miss = ~obs[:, j]
                pred = _predict(self.betas_[j], Z[miss][:, self._others(j)])
                change = max(change, float(np.max(np.abs(pred - Z[miss, j]))))
                Z[miss, j] = pred
            if change < self.tol:
                break
        return Z, fb
