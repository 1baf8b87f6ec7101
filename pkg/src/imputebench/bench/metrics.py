"""Scoring and summary statistics over evaluation records."""

from __future__ import annotations

import math
from collections import defaultdict

import numpy as np
from scipy.stats import rankdata

from ..errors import DegenerateRangeError
from ..tabular import Dataset, GroundTruthStore


def nrmse(truth: GroundTruthStore, completed: Dataset, ranges: dict) -> float:
    """Range-normalised RMSE per feature, averaged (unweighted) over the masked features.

    ``ranges`` maps column index to (min, max).  Categorical cells are
    compared on their label codes.
    """
    per_feature = []
    for col, cells in truth.by_column().items():
        lo, hi = ranges[col]
        if not hi > lo:
            raise DegenerateRangeError(f"column {col} has a zero value range")
        sq = 0.0
        for row, y in cells:
            y_hat = completed.values[row, col]
            if math.isnan(y_hat):
                raise ValueError(f"cell ({row}, {col}) was not imputed")
            sq += (y_hat - y) ** 2
        per_feature.append(math.sqrt(sq / len(cells)) / (hi - lo))
    if not per_feature:
        return 0.0
    return float(sum(per_feature) / len(per_feature))


def _group(records, keys):
    groups = defaultdict(list)
    for r in records:
        groups[tuple(getattr(r, k) for k in keys)].append(r)
    return groups


def aggregate(records, by=("method", "mechanism", "rate"), rank_within=("mechanism", "rate")):
    """Mean and sample std of NRMSE per group, with best / second-best markers.

    Markers compare groups that share the ``rank_within`` keys (for the
    default keys: the methods of one mechanism/rate column).  Returns a list
    of dicts sorted by the ``by`` keys.
    """
    rows = []
    for key, recs in _group(records, by).items():
        vals = np.array([r.nrmse for r in recs], dtype=float)
        rows.append({
            **dict(zip(by, key)),
            "n": len(vals),
            "mean": float(vals.mean()),
            "std": float(vals.std(ddof=1)) if len(vals) > 1 else 0.0,
            "marker": "",
        })
    columns = defaultdict(list)
    for row in rows:
        columns[tuple(row[k] for k in rank_within)].append(row)
    for members in columns.values():
        ordered = sorted(members, key=lambda r: (r["mean"], tuple(str(r[k]) for k in by)))
        if ordered:
            ordered[0]["marker"] = "best"
        if len(ordered) > 1:
            ordered[1]["marker"] = "second"
    return sorted(rows, key=lambda r: tuple(str(r[k]) for k in by))


def mean_ranks(records, cell_keys=("dataset", "mechanism", "rate", "fold", "partition")):
    """Average rank per method (1 = lowest NRMSE, ties share the average rank).

    Only cells that contain every method are ranked; returns
    ``(ranks dict, excluded cell keys)``.
    """
    methods = sorted({r.method for r in records})
    totals = defaultdict(float)
    used = 0
    excluded = []
    for key, recs in sorted(_group(records, cell_keys).items(), key=lambda kv: tuple(map(str, kv[0]))):
        by_method = {r.method: r.nrmse for r in recs}
        if set(by_method) != set(methods) or len(recs) != len(methods):
            excluded.append(key)
            continue
        ranks = rankdata([by_method[m] for m in methods], method="average")
        for m, rk in zip(methods, ranks):
            totals[m] += float(rk)
        used += 1
    if not used:
        return {}, excluded
    return {m: totals[m] / used for m in methods}, excluded


def pareto_frontier(points) -> list:
    """Flags of the (error, runtime) points that no other point dominates.

    A point is dominated when another is no worse on both axes and strictly
    better on one; exact duplicates therefore do not dominate each other.
    """
    pts = [(float(x), float(y)) for x, y in points]
    if not pts:
        raise ValueError("pareto_frontier needs at least one point")
    order = sorted(range(len(pts)), key=lambda i: pts[i])
    flags = [False] * len(pts)
    best_before = math.inf  # min runtime among strictly smaller errors
    i = 0
    while i < len(order):
        j = i
        x = pts[order[i]][0]
        while j < len(order) and pts[order[j]][0] == x:
            j += 1
        group = order[i:j]
        group_min = min(pts[k][1] for k in group)
        for k in group:
            y = pts[k][1]
            flags[k] = not (best_before <= y or group_min < y)
        best_before = min(best_before, group_min)
        i = j
    return flags


def fallback_percentage(fallbacks: int, batches: int) -> str:
    return f"{100.0 * fallbacks / batches:.2f}"


def fallback_report(ledgers_by_method: dict) -> list:
    """Rows of (method, fallback batches, total batches, percentage text)."""
    rows = []
    for method in sorted(ledgers_by_method):
        ledgers = ledgers_by_method[method]
        if not isinstance(ledgers, (list, tuple)):
            ledgers = [ledgers]
        total = sum(lg.batches for lg in ledgers)
        if total == 0:
            continue
        fb = sum(lg.fallbacks for lg in ledgers)
        rows.append({"method": method, "fallback_batches": fb, "total_batches": total,
                     "fallback_pct": fallback_percentage(fb, total)})
    return rows
