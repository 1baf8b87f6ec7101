"""Classical baseline imputers behind one fit-on-train / transform interface."""

from __future__ import annotations

from .base import METHODS, ImputationResult, ImputerConfig, run_imputer
from .knn import KNNImputer
from .mice import MICEImputer
from .missforest import MissForestImputer
from .simple import MeanImputer
from .softimpute import SoftImputer

_IMPUTERS = {
    "mean": MeanImputer,
    "knn": KNNImputer,
    "mice": MICEImputer,
    "softimpute": SoftImputer,
    "missforest": MissForestImputer,
}


def make_imputer(cfg: ImputerConfig):
    return _IMPUTERS[cfg.method](cfg)


def impute(train, test, cfg: ImputerConfig):
    """Fit ``cfg.method`` on ``train``; return (train result, test result)."""
    return run_imputer(make_imputer(cfg), train, test)


def _with_method(cfg, method):
    if cfg is None:
        return ImputerConfig(method=method)
    if cfg.method != method:
        from dataclasses import replace
        return replace(cfg, method=method)
    return cfg


def impute_mean(train, test, cfg=None):
    return impute(train, test, _with_method(cfg, "mean"))


def impute_knn(train, test, cfg=None):
    return impute(train, test, _with_method(cfg, "knn"))


def impute_mice(train, test, cfg=None):
    return impute(train, test, _with_method(cfg, "mice"))


def impute_softimpute(train, test, cfg=None):
    return impute(train, test, _with_method(cfg, "softimpute"))


def impute_missforest(train, test, cfg=None):
    return impute(train, test, _with_method(cfg, "missforest"))


__all__ = [
    "METHODS", "ImputationResult", "ImputerConfig", "impute", "make_imputer",
    "impute_mean", "impute_knn", "impute_mice", "impute_softimpute", "impute_missforest",
    "MeanImputer", "KNNImputer", "MICEImputer", "SoftImputer", "MissForestImputer",
]
