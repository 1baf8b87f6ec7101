"""CSV / JSON report emission.

All writers sort their rows and format floats with ``repr`` so identical
inputs always produce identical bytes.
"""

from __future__ import annotations

import csv
import json
import platform
from collections import defaultdict
from pathlib import Path

from .. import __version__
from .metrics import aggregate, fallback_report, mean_ranks, pareto_frontier
from .runner import EvalRecord

RECORD_FIELDS = ("dataset", "mechanism", "rate", "method", "fold", "partition", "nrmse", "runtime",
                 "fallback_count", "cost")
AGGREGATE_FIELDS = ("method", "mechanism", "rate", "n", "mean", "std", "marker")
RANK_FIELDS = ("method", "mean_rank", "cells")
PARETO_FIELDS = ("method", "dataset", "nrmse", "runtime", "on_frontier")
FALLBACK_FIELDS = ("method", "fallback_batches", "total_batches", "fallback_pct")
USAGE_FIELDS = ("dataset", "mechanism", "rate", "fold", "method", "partition", "batch_id", "attempts",
                "input_tokens", "output_tokens", "outcome", "latency", "approximate", "reasons")
REPORT_FILES = ("records.csv", "aggregates.csv", "ranks.csv", "pareto.csv", "fallback.csv", "usage.csv")


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, fields, rows) -> int:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(fields)
            n = 0
            for row in rows:
                w.writerow([_fmt(row[f]) for f in fields])
                n += 1
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return n


def read_records(path) -> list:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.append(EvalRecord(row["dataset"], row["mechanism"], float(row["rate"]), row["method"],
                                  int(row["fold"]), row["partition"], float(row["nrmse"]),
                                  float(row["runtime"]), int(row["fallback_count"]), float(row["cost"])))
    return out


def read_usage(path) -> dict:
    """usage.csv back into ledgers keyed like ``BenchResult.ledgers``."""
    from ..llm.ledger import UsageLedger, UsageRecord

    ledgers = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            key = (row["dataset"], row["mechanism"], float(row["rate"]), int(row["fold"]), row["method"],
                   row["partition"])
            reasons = tuple(x for x in row["reasons"].split(";") if x)
            ledgers.setdefault(key, UsageLedger()).add(
                UsageRecord(int(row["batch_id"]), int(row["attempts"]), int(row["input_tokens"]),
                            int(row["output_tokens"]), row["outcome"], float(row["latency"]),
                            row["approximate"] == "true", reasons))
    return ledgers


def pareto_points(records) -> list:
    """One point per (method, dataset): mean test NRMSE and mean per-cell runtime (train + test)."""
    groups = defaultdict(list)
    for r in records:
        groups[(r.method, r.dataset)].append(r)
    points = []
    for (method, dataset), recs in sorted(groups.items()):
        tests = [r for r in recs if r.partition == "test"] or recs
        n_cells = len({(r.mechanism, r.rate, r.fold) for r in recs})
        points.append({"method": method, "dataset": dataset,
                       "nrmse": sum(r.nrmse for r in tests) / len(tests),
                       "runtime": sum(r.runtime for r in recs) / n_cells})
    # methods compete within a dataset, never across datasets
    for dataset in sorted({p["dataset"] for p in points}):
        group = [p for p in points if p["dataset"] == dataset]
        for p, f in zip(group, pareto_frontier([(p["nrmse"], p["runtime"]) for p in group])):
            p["on_frontier"] = f
    return points


def _usage_rows(ledgers: dict, timing: bool):
    for key, ledger in ledgers.items():
        dataset, mech, rate, fold, method, part = key
        for rec in ledger.records:
            yield {"dataset": dataset, "mechanism": mech, "rate": rate, "fold": fold, "method": method,
                   "partition": part, "batch_id": rec.batch_id, "attempts": rec.attempts,
                   "input_tokens": rec.input_tokens, "output_tokens": rec.output_tokens,
                   "outcome": rec.outcome, "latency": rec.latency if timing else 0.0,
                   "approximate": rec.approximate, "reasons": ";".join(rec.reasons)}


def _versions() -> dict:
    import numpy
    import scipy
    import sklearn

    return {"imputebench": __version__, "numpy": numpy.__version__, "scipy": scipy.__version__,
            "scikit-learn": sklearn.__version__, "python": platform.python_version()}


def emit_report(records, ledgers, out_dir, *, config=None, seeds=None, failures=(), timing: bool = True,
                headline_partition: str = "test") -> dict:
    """Write every report file into ``out_dir``; returns {file name: data row count}."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = sorted(records, key=lambda r: (r.dataset, r.mechanism, r.rate, r.fold, r.method, r.partition))
    counts = {}
    counts["records.csv"] = _write_csv(out / "records.csv", RECORD_FIELDS,
                                       ({f: getattr(r, f) for f in RECORD_FIELDS} for r in records))
    headline = [r for r in records if r.partition == headline_partition]
    counts["aggregates.csv"] = _write_csv(out / "aggregates.csv", AGGREGATE_FIELDS, aggregate(headline))
    ranks, excluded = mean_ranks(headline)
    n_cells = len({(r.dataset, r.mechanism, r.rate, r.fold, r.partition) for r in headline}) - len(excluded)
    counts["ranks.csv"] = _write_csv(out / "ranks.csv", RANK_FIELDS,
                                     ({"method": m, "mean_rank": v, "cells": n_cells} for m, v in sorted(ranks.items())))
    counts["pareto.csv"] = _write_csv(out / "pareto.csv", PARETO_FIELDS, pareto_points(records))
    by_method = defaultdict(list)
    for key, lg in ledgers.items():
        by_method[key[4]].append(lg)
    counts["fallback.csv"] = _write_csv(out / "fallback.csv", FALLBACK_FIELDS, fallback_report(dict(by_method)))
    counts["usage.csv"] = _write_csv(out / "usage.csv", USAGE_FIELDS, _usage_rows(ledgers, timing))
    manifest = {
        "config": config,
        "files": counts,
        "failures": list(failures),
        "excluded_rank_cells": [list(map(_fmt, k)) for k in excluded],
        "headline_partition": headline_partition,
        "seeds": seeds or {},
        "timing": timing,
        "versions": _versions(),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n",
                                       encoding="utf-8")
    return counts
