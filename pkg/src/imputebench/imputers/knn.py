"""k-nearest-neighbour imputation over partially observed rows.

The distance between a query row and a training row is the root of the mean
squared gap over the features both observe.  Candidates for a missing cell
are the training rows that observe that column and share at least one
observed feature with the query; equal distances keep training-row order.
"""

from __future__ import annotations

import numpy as np

from .base import column_mode, column_stats


def masked_distances(q: np.ndarray, T: np.ndarray, T_obs: np.ndarray):
    """Distances from query ``q`` to every row of ``T``; inf where nothing is co-observed."""
    co = T_obs & ~np.isnan(q)
    cnt = co.sum(axis=1)
    diff = np.where(co, np.nan_to_num(T) - np.nan_to_num(q), 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        d = np.sqrt((diff * diff).sum(axis=1) / cnt)
    d[cnt == 0] = np.inf
    return d


class KNNImputer:
    def __init__(self, cfg):
        self.k = cfg.k
        self.T_ = None

    def fit(self, X, cats, names=None):
        self.cats = cats
        self.T_ = X.copy()
        self.T_obs_ = ~np.isnan(X)
        self.stats_ = column_stats(X, cats, names)
        return self._complete(X)

    def transform(self, X):
        return self._complete(X)

    def _complete(self, Q):
        T, T_obs, k = self.T_, self.T_obs_, self.k
        Z = Q.copy()
        fb = np.zeros(Q.shape, dtype=bool)
        for i in np.flatnonzero(np.isnan(Q).any(axis=1)):
            d = masked_distances(Q[i], T, T_obs)
            reachable = np.isfinite(d)
            for j in np.flatnonzero(np.isnan(Q[i])):
                pool = np.flatnonzero(T_obs[:, j] & reachable)
                if pool.size == 0:
                    Z[i, j] = self.stats_[j]
                    fb[i, j] = True
                    continue
                nearest = pool[np.lexsort((pool, d[pool]))[:k]]
                vals = T[nearest, j]
                Z[i, j] = column_mode(vals) if self.cats[j] else float(np.mean(vals))
        return Z, fb
