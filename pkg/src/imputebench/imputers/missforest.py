"""missForest-style iterative random-forest imputation (scikit-learn forests)."""

from __future__ import annotations

import numpy as np
from sklearn.ensemble import RandomForestClassifier, RandomForestRegressor

from ..rng import derive_seed
from .base import column_stats, fill_with


class MissForestImputer:
    def __init__(self, cfg):
        self.cfg = cfg
        self.max_iter = cfg.iterations
        self.info = {}

    def _forest(self, j, iteration):
        seed = derive_seed(self.cfg.seed, "missforest", iteration, j) % (2**32)
        kw = dict(n_estimators=self.cfg.n_estimators, max_features="sqrt", bootstrap=True,
                  max_depth=self.cfg.max_depth, min_samples_leaf=self.cfg.min_samples_leaf,
                  random_state=seed, n_jobs=1)
        if self.cats[j]:
            return RandomForestClassifier(**kw)
        return RandomForestRegressor(criterion="absolute_error", **kw)

    def _others(self, j):
        return [c for c in range(self.p) if c != j]

    def _fit_column(self, Z, obs, j, iteration):
        rows = obs[:, j]
        y = Z[rows, j]
        forest = self._forest(j, iteration)
        forest.fit(Z[rows][:, self._others(j)], y)
        return forest

    def _diffs(self, Z, Z_old):
        cont = self.cats == 0
        out = []
        if cont.any():
            num = float(((Z[:, cont] - Z_old[:, cont]) ** 2).sum())
            den = float((Z[:, cont] ** 2).sum())
            out.append(num / den if den > 0 else 0.0)
        else:
            out.append(None)
        cat = ~cont
        n_cat_missing = int(self.miss_[:, cat].sum())
        if cat.any() and n_cat_missing:
            out.append(float((Z[:, cat] != Z_old[:, cat]).sum()) / n_cat_missing)
        else:
            out.append(None)
        return out

    def fit(self, X, cats, names=None):
        self.cats = np.asarray(cats)
        n, self.p = X.shape
        obs = ~np.isnan(X)
        self.miss_ = ~obs
        self.stats_ = column_stats(X, self.cats, names)
        Z = fill_with(X, self.stats_)
        order = sorted((j for j in range(self.p) if self.miss_[:, j].any()),
                       key=lambda j: (int(self.miss_[:, j].sum()), j))
        self.order_ = order
        forests = {}
        prev = [np.inf, np.inf]
        iterations = 0
        stopped_early = False
        if self.p >= 2:
            for it in range(self.max_iter if order else 0):
                Z_old = Z.copy()
                new_forests = {}
                for j in order:
                    f = self._fit_column(Z, obs, j, it)
                    new_forests[j] = f
                    pred = f.predict(Z[self.miss_[:, j]][:, self._others(j)])
                    Z[self.miss_[:, j], j] = pred
                iterations += 1
                d_cont, d_cat = self._diffs(Z, Z_old)
                worse_cont = d_cont is None or d_cont > prev[0]
                worse_cat = d_cat is None or d_cat > prev[1]
                if it > 0 and worse_cont and worse_cat:
                    Z = Z_old  # the previous iterate was the better one
                    stopped_early = True
                    break
                forests = new_forests
                prev = [d_cont if d_cont is not None else prev[0],
                        d_cat if d_cat is not None else prev[1]]
        self.forests_ = dict(forests)
        self.Z_ = Z
        self.obs_ = obs
        self.info = {"iterations": iterations, "stopped_early": stopped_early}
        fb = np.zeros(X.shape, dtype=bool)
        if self.p < 2:
            fb[self.miss_] = True
        return Z, fb

    def _forest_for(self, j):
        if j not in self.forests_:
            self.forests_[j] = self._fit_column(self.Z_, self.obs_, j, "final")
        return self.forests_[j]

    def transform(self, X):
        obs = ~np.isnan(X)
        Z = fill_with(X, self.stats_)
        fb = np.zeros(X.shape, dtype=bool)
        if self.p < 2:
            fb[~obs] = True
            return Z, fb
        miss = ~obs
        order = sorted((j for j in range(self.p) if miss[:, j].any()),
                       key=lambda j: (int(miss[:, j].sum()), j))
        for _ in range(self.max_iter if order else 0):
            Z_old = Z.copy()
            for j in order:
                Z[miss[:, j], j] = self._forest_for(j).predict(Z[miss[:, j]][:, self._others(j)])
            if np.max(np.abs(Z - Z_old)) < self.cfg.convergence_tol:
                break
        return Z, fb
