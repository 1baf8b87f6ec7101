"""Multivariate amputation under MCAR, MAR and MNAR with exact quotas.

Missingness is placed by rank rather than by sampling a probability per
cell, so the realized count always equals the quota:

* MCAR draws ``round(rate * n_rows * n_features)`` observed cells uniformly
  over all eligible features.
* MAR pairs features (the more target-correlated one drives the other) and
  masks ``x_miss`` on the rows holding the largest ``x_obs`` values.
* MNAR masks, per feature, the cells holding that feature's largest values.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InfeasibleQuotaError, PairingError, SpecError
from .rng import PortableRNG
from .tabular import Dataset, GroundTruthStore, MissingMask

MECHANISMS = ("MCAR", "MAR", "MNAR")


@dataclass(frozen=True)
class AmputationSpec:
    mechanism: str
    rate: float
    seed: int = 0
    columns: Optional[tuple] = None  # None = all non-target features

    def __post_init__(self):
        mech = self.mechanism.upper()
        object.__setattr__(self, "mechanism", mech)
        if mech not in MECHANISMS:
            raise SpecError(f"unknown mechanism {self.mechanism!r}")
        if not 0.0 < self.rate < 1.0:
            raise SpecError(f"rate must lie strictly between 0 and 1, got {self.rate}")
        if self.columns is not None:
            cols = tuple(int(c) for c in self.columns)
            object.__setattr__(self, "columns", cols)
            if len(set(cols)) != len(cols):
                raise SpecError("explicit column list has duplicates")
            if mech == "MAR" and len(cols) % 2:
                raise SpecError("MAR column lists are (x_obs, x_miss) pairs and need even length")


@dataclass
class AmputationOutcome:
    mask: MissingMask
    quota_per_feature: dict = field(default_factory=dict)
    pairing: list = field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(self.quota_per_feature.values())


def quota(rate: float, n: int) -> int:
    """round-half-away-from-zero of rate*n, lifted to 1 when rate > 0."""
    m = int(math.floor(rate * n + 0.5))
    if m == 0 and rate > 0 and n > 0:
        m = 1
    return m


def _eligible(data: Dataset, spec: AmputationSpec) -> list:
    if spec.columns is None:
        return data.feature_indices
    t = data.target_index
    for c in spec.columns:
        if c == t:
            raise SpecError("the target column cannot be amputated")
        if not 0 <= c < data.n_columns:
            raise SpecError(f"column {c} out of range")
    return list(spec.columns)


def _top_rows(values: np.ndarray, candidates: np.ndarray, m: int) -> np.ndarray:
    """The m candidate rows with the largest values; ties by ascending row index."""
    v = values[candidates]
    key = np.where(np.isnan(v), np.inf, -v)  # missing driver values rank last
    order = np.lexsort((candidates, key))
    return candidates[order[:m]]


def ampute_mcar(data: Dataset, spec: AmputationSpec) -> AmputationOutcome:
    cols = _eligible(data, spec)
    m = quota(spec.rate, data.n_rows * len(cols))
    sub_missing = data.missing[:, cols]
    obs_r, obs_c = np.nonzero(~sub_missing)
    if m > obs_r.size:
        raise InfeasibleQuotaError(f"MCAR quota {m} exceeds {obs_r.size} observed cells")
    picks = PortableRNG(spec.seed).choice(obs_r.size, m)
    bits = np.zeros(data.shape, dtype=bool)
    rows, cidx = obs_r[picks], obs_c[picks]
    for r, ci in zip(rows, cidx):
        bits[r, cols[ci]] = True
    counts = {c: int(bits[:, c].sum()) for c in cols}
    return AmputationOutcome(MissingMask(bits, "amputated"), counts)


def _abs_corr(x: np.ndarray, y: np.ndarray) -> float:
    ok = ~(np.isnan(x) | np.isnan(y))
    if ok.sum() < 2:
        return math.nan
    a, b = x[ok] - x[ok].mean(), y[ok] - y[ok].mean()
    den = math.sqrt(float(a @ a) * float(b @ b))
    if den == 0.0:
        return math.nan
    return abs(float(a @ b) / den)


def pair_features(data: Dataset, columns: Optional[Sequence[int]] = None) -> list:
    """Greedy (x_obs, x_miss) pairs down the |corr with target| ranking.

    Undefined correlations rank after every defined one; ties go to the
    lower column index.  With an odd count the last-ranked feature is left
    out of MAR missingness.
    """
    cols = list(data.feature_indices if columns is None else columns)
    if len(cols) < 2:
        raise PairingError("MAR pairing needs at least two features")
    y = data.target_codes
    corr = {c: _abs_corr(data.values[:, c], y) for c in cols}
    if all(math.isnan(v) for v in corr.values()):
        raise PairingError("no feature has a defined correlation with the target")
    ranked = sorted(cols, key=lambda c: (math.isnan(corr[c]), -(0.0 if math.isnan(corr[c]) else corr[c]), c))
    return [(ranked[i], ranked[i + 1]) for i in range(0, len(ranked) - 1, 2)]


def ampute_mar(data: Dataset, spec: AmputationSpec) -> AmputationOutcome:
    if spec.columns is not None:
        _eligible(data, spec)
        cols = spec.columns
        pairs = [(cols[i], cols[i + 1]) for i in range(0, len(cols), 2)]
    else:
        pairs = pair_features(data)
    m = quota(spec.rate, data.n_rows)
    bits = np.zeros(data.shape, dtype=bool)
    counts = {}
    for x_obs, x_miss in pairs:
        candidates = np.flatnonzero(~data.missing[:, x_miss])
        if m > candidates.size:
            raise InfeasibleQuotaError(f"MAR quota {m} exceeds {candidates.size} observed cells of column {x_miss}")
        rows = _top_rows(data.values[:, x_obs], candidates, m)
        bits[rows, x_miss] = True
        counts[x_miss] = int(rows.size)
    return AmputationOutcome(MissingMask(bits, "amputated"), counts, list(pairs))


def ampute_mnar(data: Dataset, spec: AmputationSpec) -> AmputationOutcome:
    cols = _eligible(data, spec)
    m = quota(spec.rate, data.n_rows)
    bits = np.zeros(data.shape, dtype=bool)
    counts = {}
    for c in cols:
        candidates = np.flatnonzero(~data.missing[:, c])
        if m > candidates.size:
            raise InfeasibleQuotaError(f"MNAR quota {m} exceeds {candidates.size} observed cells of column {c}")
        rows = _top_rows(data.values[:, c], candidates, m)
        bits[rows, c] = True
        counts[c] = int(rows.size)
    return AmputationOutcome(MissingMask(bits, "amputated"), counts)


def ampute(data: Dataset, spec: AmputationSpec) -> AmputationOutcome:
    return {"MCAR": ampute_mcar, "MAR": ampute_mar, "MNAR": ampute_mnar}[spec.mechanism](data, spec)


def write_mask_csv(path, data: Dataset, store: GroundTruthStore) -> None:
    """Export amputated cells as (row, column, original_value) triples.

    ``data`` supplies the schema so categorical values are written as labels.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "column", "original_value"])
        for (r, c) in store:
            v = store.entries[(r, c)]
            s = data.schema[c]
            w.writerow([r, c, s.categories[int(v)] if s.is_categorical else repr(float(v))])


def read_mask_csv(path, data: Dataset):
    """Inverse of :func:`write_mask_csv`: returns (MissingMask, GroundTruthStore)."""
    bits = np.zeros(data.shape, dtype=bool)
    entries = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            r, c = int(rec["row"]), int(rec["column"])
            s = data.schema[c]
            tok = rec["original_value"]
            entries[(r, c)] = float(s.code_of(tok)) if s.is_categorical else float(tok)
            bits[r, c] = True
    return MissingMask(bits, "amputated"), GroundTruthStore(entries)
