"""Tabular data model: datasets, masks, ground truth, scaling and folds.

Cells are held in a float matrix.  Continuous columns store their value,
categorical columns store the integer code of their label (codes follow the
order of ``FeatureSchema.categories``) and NaN marks a missing cell.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    EmptyDatasetError,
    IngestionError,
    InfeasibleFoldsError,
    MaskOverlapError,
    UndefinedRangeError,
)
from .rng import PortableRNG

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
MISSING_TOKENS = frozenset({"", "NA", "NaN", "?"})

RAW = "raw"
UNIT = "unit"


@dataclass(frozen=True)
class FeatureSchema:
    name: str
    kind: str = CONTINUOUS
    categories: tuple = ()
    is_target: bool = False

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, CATEGORICAL):
            raise ValueError(f"unknown column kind {self.kind!r}")
        object.__setattr__(self, "categories", tuple(str(c) for c in self.categories))
        if self.kind == CATEGORICAL and not self.categories:
            raise ValueError(f"categorical column {self.name!r} needs at least one category")
        if self.kind == CONTINUOUS and self.categories:
            raise ValueError(f"continuous column {self.name!r} cannot carry categories")

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL

    def code_of(self, label: str) -> int:
        try:
            return self.categories.index(label)
        except ValueError:
            raise IngestionError(f"label {label!r} is not a category of {self.name!r}") from None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "categories": list(self.categories),
            "is_target": self.is_target,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        return cls(d["name"], d.get("kind", CONTINUOUS), tuple(d.get("categories", ())),
                   bool(d.get("is_target", False)))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Named table with a per-column schema and exactly one target column.

    ``scale`` records whether continuous cells are on their raw scale or were
    mapped through a fitted normalizer; the benchmark uses it to keep the
    classical and LLM paths apart.
    """

    name: str
    schema: tuple
    values: np.ndarray
    scale: str = RAW

    def __post_init__(self):
        schema = tuple(self.schema)
        object.__setattr__(self, "schema", schema)
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2 or values.shape[1] != len(schema):
            raise ValueError(f"values of shape {values.shape} do not match {len(schema)} schema columns")
        if values.shape[0] < 1:
            raise EmptyDatasetError(f"dataset {self.name!r} has no rows")
        if sum(s.is_target for s in schema) != 1:
            raise ValueError("exactly one column must be the target")
        if len(schema) < 2:
            raise ValueError("dataset needs at least one non-target feature")
        for j, col in enumerate(schema):
            if col.is_categorical:
                v = values[:, j]
                v = v[~np.isnan(v)]
                if v.size and (np.any(v != np.round(v)) or v.min() < 0 or v.max() >= len(col.categories)):
                    raise ValueError(f"column {col.name!r} holds codes outside its categories")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    @property
    def target_index(self) -> int:
        return next(j for j, s in enumerate(self.schema) if s.is_target)

    @property
    def feature_indices(self) -> list:
        return [j for j, s in enumerate(self.schema) if not s.is_target]

    @property
    def n_features(self) -> int:
        return self.n_columns - 1

    @property
    def column_names(self) -> list:
        return [s.name for s in self.schema]

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    @property
    def target_codes(self) -> np.ndarray:
        return self.values[:, self.target_index]

    def column_index(self, name: str) -> int:
        return self.column_names.index(name)

    def cell(self, row: int, col: int):
        """Cell as a Python value: float, category label, or None when missing."""
        v = self.values[row, col]
        if np.isnan(v):
            return None
        s = self.schema[col]
        return s.categories[int(v)] if s.is_categorical else float(v)

    def to_rows(self) -> list:
        return [[self.cell(i, j) for j in range(self.n_columns)] for i in range(self.n_rows)]

    def with_values(self, values, *, scale: Optional[str] = None, name: Optional[str] = None) -> "Dataset":
        return Dataset(name or self.name, self.schema, values, scale or self.scale)

    def with_schema(self, schema, values) -> "Dataset":
        return Dataset(self.name, tuple(schema), values, self.scale)

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.name, self.schema, self.values[rows], self.scale)

    def equals(self, other: "Dataset") -> bool:
        return (
            self.schema == other.schema
            and self.values.shape == other.values.shape
            and bool(np.array_equal(self.values, other.values, equal_nan=True))
        )


@dataclass(frozen=True, eq=False)
class MissingMask:
    bits: np.ndarray
    origin: str = "amputated"

    def __post_init__(self):
        if self.origin not in ("natural", "amputated"):
            raise ValueError(f"unknown mask origin {self.origin!r}")
        bits = np.array(self.bits, dtype=bool, copy=True)
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def count(self) -> int:
        return int(self.bits.sum())

    @classmethod
    def empty(cls, shape, origin: str = "amputated") -> "MissingMask":
        return cls(np.zeros(shape, dtype=bool), origin)

    @classmethod
    def natural(cls, data: Dataset) -> "MissingMask":
        return cls(data.missing, "natural")


@dataclass
class GroundTruthStore:
    """Original values of amputated cells, keyed by (row, column)."""

    entries: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(sorted(self.entries))

    def columns(self) -> list:
        return sorted({c for _, c in self.entries})

    def by_column(self) -> dict:
        out: dict = {}
        for (r, c) in sorted(self.entries):
            out.setdefault(c, []).append((r, self.entries[(r, c)]))
        return out

    def restore(self, data: Dataset) -> Dataset:
        values = data.values.copy()
        for (r, c), v in self.entries.items():
            values[r, c] = v
        return data.with_values(values)


@dataclass(frozen=True)
class NormalizationParams:
    ranges: dict  # column index -> (min, max)

    def __post_init__(self):
        for col, (lo, hi) in self.ranges.items():
            if hi < lo:
                raise ValueError(f"column {col}: max {hi} < min {lo}")

    @property
    def constant(self) -> set:
        return {c for c, (lo, hi) in self.ranges.items() if hi == lo}


@dataclass(frozen=True, eq=False)
class FoldAssignment:
    k: int
    fold_of_row: np.ndarray

    def __post_init__(self):
        f = np.array(self.fold_of_row, dtype=np.int64, copy=True)
        f.setflags(write=False)
        object.__setattr__(self, "fold_of_row", f)

    def rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of_row == fold)

    def split(self, fold: int):
        """(train row indices, test row indices) for one fold."""
        test = self.fold_of_row == fold
        return np.flatnonzero(~test), np.flatnonzero(test)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row_index", "fold_id"])
            for i, f in enumerate(self.fold_of_row):
                w.writerow([i, int(f)])


def _is_float(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def _missing_token(token: str) -> bool:
    return token.strip() in MISSING_TOKENS


def load_csv(path, schema_hint: Optional[Sequence[FeatureSchema]] = None, *,
             target: Optional[str] = None, name: Optional[str] = None) -> Dataset:
    """Read a comma-separated file with a header row into a :class:`Dataset`.

    Without a schema hint the target is ``target`` (default: last column) and
    is always categorical; other columns are continuous when every present
    token parses as a number, categorical otherwise.  Missing tokens are the
    empty string, ``NA``, ``NaN`` and ``?``.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise EmptyDatasetError(f"{path}: no header row")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    # blank trailing lines are not data rows
    while body and not any(t.strip() for t in body[-1]):
        body.pop()
    if not body:
        raise EmptyDatasetError(f"{path}: no data rows")
    for i, r in enumerate(body):
        if len(r) != len(header):
            raise IngestionError(f"{path}: row {i + 1} (line {i + 2}) has {len(r)} fields, header has {len(header)}")

    if schema_hint is not None:
        schema = list(schema_hint)
        if [s.name for s in schema] != header:
            raise IngestionError(f"{path}: header {header} does not match schema hint")
    else:
        tname = target if target is not None else header[-1]
        if tname not in header:
            raise IngestionError(f"{path}: target column {tname!r} not in header")
        schema = []
        for j, h in enumerate(header):
            tokens = [r[j].strip() for r in body if not _missing_token(r[j])]
            is_target = h == tname
            if not is_target and all(_is_float(t) for t in tokens) and tokens:
                schema.append(FeatureSchema(h, CONTINUOUS, is_target=False))
            else:
                cats = list(dict.fromkeys(tokens)) or ["<none>"]
                schema.append(FeatureSchema(h, CATEGORICAL, tuple(cats), is_target=is_target))

    values = np.full((len(body), len(header)), np.nan)
    for i, r in enumerate(body):
        for j, s in enumerate(schema):
            tok = r[j].strip()
            if _missing_token(tok):
                continue
            if s.is_categorical:
                values[i, j] = s.code_of(tok)
            else:
                try:
                    values[i, j] = float(tok)
                except ValueError:
                    pass  # unparseable numeric cell is natural missingness
    tidx = next(j for j, s in enumerate(schema) if s.is_target)
    if np.isnan(values[:, tidx]).any():
        raise IngestionError(f"{path}: target column has missing values")
    return Dataset(name or path.stem, tuple(schema), values)


def _format_value(v: float) -> str:
    return repr(float(v))


def write_csv(data: Dataset, path) -> None:
    """Write a dataset so that :func:`load_csv` with its schema reads it back exactly."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(data.column_names)
        for row in data.values:
            out = []
            for s, v in zip(data.schema, row):
                if np.isnan(v):
                    out.append("")
                elif s.is_categorical:
                    out.append(s.categories[int(v)])
                else:
                    out.append(_format_value(v))
            w.writerow(out)


def fit_normalizer(data: Dataset, rows: Optional[Iterable[int]] = None) -> NormalizationParams:
    """Per-continuous-column min/max over ``rows`` (all rows by default), ignoring missing cells."""
    idx = np.arange(data.n_rows) if rows is None else np.asarray(list(rows), dtype=np.int64)
    if idx.size == 0:
        raise ValueError("fit_normalizer needs at least one row")
    ranges = {}
    for j, s in enumerate(data.schema):
        if s.is_categorical or s.is_target:
            continue
        col = data.values[idx, j]
        col = col[~np.isnan(col)]
        if col.size == 0:
            raise UndefinedRangeError(s.name)
        ranges[j] = (float(col.min()), float(col.max()))
    return NormalizationParams(ranges)


def apply_normalizer(data: Dataset, params: NormalizationParams) -> Dataset:
    values = data.values.copy()
    for j, s in enumerate(data.schema):
        if s.is_categorical or s.is_target:
            continue
        if j not in params.ranges:
            raise ValueError(f"normalizer has no range for column {s.name!r}")
        lo, hi = params.ranges[j]
        col = values[:, j]
        if hi == lo:
            values[:, j] = np.where(np.isnan(col), np.nan, 0.0)
        else:
            values[:, j] = (col - lo) / (hi - lo)
    return data.with_values(values, scale=UNIT)


def invert_normalizer(data: Dataset, params: NormalizationParams) -> Dataset:
    values = data.values.copy()
    for j, (lo, hi) in params.ranges.items():
        values[:, j] = values[:, j] * (hi - lo) + lo
    return data.with_values(values, scale=RAW)


def stratified_kfold(data: Dataset, k: int, seed: int) -> FoldAssignment:
    """Stratified fold ids: rows of each class are shuffled and dealt round-robin.

    The dealing position carries over from one class to the next, so overall
    fold sizes also differ by at most one.
    """
    if k < 2:
        raise InfeasibleFoldsError(f"k must be at least 2, got {k}")
    if k > data.n_rows:
        raise InfeasibleFoldsError(f"k={k} exceeds the {data.n_rows} available rows")
    rng = PortableRNG(seed)
    labels = data.target_codes
    folds = np.empty(data.n_rows, dtype=np.int64)
    offset = 0
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(members.size)]
        folds[members] = (offset + np.arange(members.size)) % k
        offset = (offset + members.size) % k
    return FoldAssignment(k, folds)


def apply_mask(data: Dataset, mask: MissingMask):
    """Blank out the masked cells; returns (masked dataset, ground-truth store)."""
    bits = mask.bits
    if bits.shape != data.shape:
        raise ValueError(f"mask shape {bits.shape} does not match data shape {data.shape}")
    if bits[:, data.target_index].any():
        raise MaskOverlapError("the target column can never be masked")
    overlap = bits & data.missing
    if overlap.any():
        r, c = np.argwhere(overlap)[0]
        raise MaskOverlapError(f"cell ({r}, {c}) is already missing")
    rows, cols = np.nonzero(bits)
    store = GroundTruthStore({(int(r), int(c)): float(data.values[r, c]) for r, c in zip(rows, cols)})
    values = data.values.copy()
    values[bits] = np.nan
    return data.with_values(values), store
