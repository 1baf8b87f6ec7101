"""Tiling of a fold partition into 40-row by 10-feature prompt windows."""

from __future__ import annotations

import math
from dataclasses import dataclass

MAX_ROWS = 40
MAX_COLS = 10


@dataclass(frozen=True)
class BatchWindow:
    row_start: int
    row_end: int
    col_start: int  # positions among the non-target features
    col_end: int

    def __post_init__(self):
        if not (0 <= self.row_start < self.row_end and 0 <= self.col_start < self.col_end):
            raise ValueError(f"empty or inverted window {self}")
        if self.row_end - self.row_start > MAX_ROWS or self.col_end - self.col_start > MAX_COLS:
            raise ValueError(f"window {self} exceeds {MAX_ROWS}x{MAX_COLS}")

    @property
    def rows(self) -> range:
        return range(self.row_start, self.row_end)

    @property
    def cols(self) -> range:
        return range(self.col_start, self.col_end)

    @property
    def shape(self):
        return self.row_end - self.row_start, self.col_end - self.col_start


@dataclass(frozen=True)
class BatchPlan:
    windows: tuple
    partition_rows: int
    n_features: int

    def __len__(self):
        return len(self.windows)

    def __iter__(self):
        return iter(self.windows)


def expected_batches(rows: int, features: int, max_rows: int = MAX_ROWS, max_cols: int = MAX_COLS) -> int:
    return math.ceil(rows / max_rows) * math.ceil(features / max_cols)


def plan_batches(partition_rows: int, n_features: int) -> BatchPlan:
    """Row tiles of at most 40, each split into column tiles of at most 10 (row-major)."""
    if partition_rows < 1 or n_features < 1:
        raise ValueError("plan_batches needs at least one row and one feature")
    windows = []
    for r0 in range(0, partition_rows, MAX_ROWS):
        r1 = min(r0 + MAX_ROWS, partition_rows)
        for c0 in range(0, n_features, MAX_COLS):
            windows.append(BatchWindow(r0, r1, c0, min(c0 + MAX_COLS, n_features)))
    return BatchPlan(tuple(windows), partition_rows, n_features)
