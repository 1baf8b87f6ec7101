"""Extraction and validation of model responses.

Validation is total: any text yields a :class:`ParsedBatch` whose verdict is
either ``valid`` or ``invalid`` with one of the reasons in ``REASONS``.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .batching import BatchWindow

REASONS = ("shape-mismatch", "non-numeric", "unknown-category", "missing-marker-present", "unparseable")
MISSING_MARKERS = frozenset({"", "nan", "?", "<missing>", "na", "n/a", "null", "none", "missing"})

_FENCE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)


@dataclass(frozen=True, eq=False)
class ParsedBatch:
    cells: Optional[np.ndarray]
    verdict: str
    reason: Optional[str] = None

    @property
    def valid(self) -> bool:
        return self.verdict == "valid"


def _invalid(reason: str) -> ParsedBatch:
    return ParsedBatch(None, "invalid", reason)


def _table_line(line: str) -> bool:
    # comma-separated row, or a lone token (single-column tables); prose has spaces
    s = line.strip()
    return bool(s) and ("," in s or not any(ch.isspace() for ch in s))


def extract_table(text: str) -> list:
    """Rows of the CSV table embedded in ``text`` (fenced block first, else longest table-like run)."""
    for block in _FENCE.findall(text):
        if block.strip():
            text = block
            break
    runs, current = [], []
    for line in text.splitlines():
        if _table_line(line) and not line.strip().startswith("```"):
            current.append(line.strip())
        else:
            if current:
                runs.append(current)
            current = []
    if current:
        runs.append(current)
    if not runs:
        return []
    best = max(runs, key=len)  # first of the longest runs
    try:
        return [[c.strip() for c in row] for row in csv.reader(best)]
    except csv.Error:
        return []


def _norm(s: str) -> str:
    return s.strip().strip('"').lower()


def parse_and_validate(response: str, window: BatchWindow, schema) -> ParsedBatch:
    """Validate ``response`` against the window's shape and column schemas.

    ``schema`` lists the FeatureSchema of each window column, in order.
    Returned cells hold floats, with categorical labels mapped to codes.
    """
    n_rows, n_cols = window.shape
    schema = list(schema)
    if len(schema) != n_cols:
        raise ValueError(f"schema has {len(schema)} columns, window has {n_cols}")
    if not isinstance(response, str):
        return _invalid("unparseable")
    rows = extract_table(response)
    if not rows:
        return _invalid("unparseable")
    names = [_norm(s.name) for s in schema]
    if [_norm(c) for c in rows[0]] == names or len(rows) == n_rows + 1:
        rows = rows[1:]
    if len(rows) != n_rows or any(len(r) != n_cols for r in rows):
        return _invalid("shape-mismatch")
    if any(_norm(tok) in MISSING_MARKERS for r in rows for tok in r):
        return _invalid("missing-marker-present")
    cells = np.empty((n_rows, n_cols))
    for i, r in enumerate(rows):
        for j, (tok, s) in enumerate(zip(r, schema)):
            tok = tok.strip().strip('"')
            if s.is_categorical:
                code = _category_code(tok, s.categories)
                if code is None:
                    return _invalid("unknown-category")
                cells[i, j] = code
            else:
                try:
                    v = float(tok)
                except ValueError:
                    return _invalid("non-numeric")
                if not math.isfinite(v):
                    return _invalid("non-numeric")
                cells[i, j] = v
    return ParsedBatch(cells, "valid")


def _category_code(tok: str, categories) -> Optional[int]:
    if tok in categories:
        return categories.index(tok)
    # numeric labels may come back reformatted, e.g. "1.0" for "1"
    try:
        v = float(tok)
    except ValueError:
        return None
    for k, c in enumerate(categories):
        try:
            if float(c) == v:
                return k
        except ValueError:
            continue
    return None
