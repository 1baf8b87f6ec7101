"""SoftImpute: nuclear-norm regularised matrix completion.

Iterates ``Z <- SVT_lam(P_obs(X) + P_miss(Z))`` along a descending lambda
grid with warm starts.  Test rows are completed by a ridge regression of
their observed coordinates on the fitted right singular vectors (scaled by
the singular values), with the ridge weight set from the training residual
variance.
"""

from __future__ import annotations

import numpy as np

from .base import column_stats


def svt(M: np.ndarray, lam: float):
    """Singular value soft-thresholding; returns (Z, U, shrunk s, Vt)."""
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    s = np.maximum(s - lam, 0.0)
    return (U * s) @ Vt, U, s, Vt


def nuclear_norm(Z: np.ndarray) -> float:
    return float(np.linalg.svd(Z, compute_uv=False).sum())


def objective(X, obs, Z, lam) -> float:
    r = np.where(obs, X - Z, 0.0)
    return 0.5 * float((r * r).sum()) + lam * nuclear_norm(Z)


def default_grid(X0: np.ndarray, n: int = 10) -> np.ndarray:
    smax = float(np.linalg.svd(X0, compute_uv=False)[0]) if X0.size else 0.0
    if smax == 0.0:
        return np.array([0.0])
    return np.geomspace(smax / 2.0, smax / 200.0, n)


class SoftImputer:
    def __init__(self, cfg, track_objective: bool = False):
        self.cfg = cfg
        self.max_iter = cfg.iterations
        self.tol = cfg.convergence_tol
        self.track_objective = track_objective
        self.info = {}

    def fit(self, X, cats, names=None):
        self.stats_ = column_stats(X, np.zeros_like(cats), names)
        obs = ~np.isnan(X)
        X0 = np.where(obs, X, 0.0)
        grid = np.asarray(self.cfg.lambda_grid) if self.cfg.lambda_grid is not None else default_grid(X0)
        Z = np.zeros_like(X0)
        converged = True
        objectives = []
        U = s = Vt = None
        for lam in grid:
            lam_trace = []
            for _ in range(self.max_iter):
                Znew, U, s, Vt = svt(np.where(obs, X0, Z), lam)
                den = max(float((Z * Z).sum()), 1e-300)
                delta = float(((Znew - Z) ** 2).sum()) / den
                Z = Znew
                if self.track_objective:
                    lam_trace.append(objective(X0, obs, Z, lam))
                if delta < self.tol:
                    break
            else:
                converged = False
            objectives.append(lam_trace)
        self.lam_ = float(grid[-1])
        keep = s > 0
        self.basis_ = (Vt[keep].T * s[keep])  # p x r
        resid = np.where(obs, X0 - Z, 0.0)
        n_obs = max(int(obs.sum()), 1)
        self.noise_ = max(float((resid * resid).sum()) / n_obs, 1e-12)
        self.n_ = X.shape[0]
        self.info = {"converged": converged, "lambda": self.lam_, "rank": int(keep.sum()),
                     "objectives": objectives}
        fb = np.zeros(X.shape, dtype=bool)
        return np.where(obs, X, Z), fb

    def fold_in(self, x: np.ndarray) -> np.ndarray:
        o = ~np.isnan(x)
        B = self.basis_
        if not o.any() or B.shape[1] == 0:
            return self.stats_.copy()
        Bo = B[o]
        G = Bo.T @ Bo + self.n_ * self.noise_ * np.eye(B.shape[1])
        a = np.linalg.solve(G, Bo.T @ x[o])
        return B @ a

    def transform(self, X):
        Z = X.copy()
        fb = np.zeros(X.shape, dtype=bool)
        for i in np.flatnonzero(np.isnan(X).any(axis=1)):
            est = self.fold_in(X[i])
            miss = np.isnan(X[i])
            Z[i, miss] = est[miss]
            if not (~miss).any() or self.basis_.shape[1] == 0:
                fb[i, miss] = True
        return Z, fb
