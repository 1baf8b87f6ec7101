"""Mean / mode imputation with training-partition statistics."""

from __future__ import annotations

import numpy as np

from .base import column_stats, fill_with


class MeanImputer:
    def __init__(self, cfg=None):
        self.cfg = cfg
        self.stats_ = None

    def fit(self, X, cats, names=None):
        self.stats_ = column_stats(X, cats, names)
        return fill_with(X, self.stats_), np.zeros(X.shape, dtype=bool)

    def transform(self, X):
        return fill_with(X, self.stats_), np.zeros(X.shape, dtype=bool)
