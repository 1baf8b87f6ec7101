"""Benchmark orchestration, scoring and reporting."""

from .metrics import aggregate, fallback_percentage, fallback_report, mean_ranks, nrmse, pareto_frontier
from .report import emit_report, pareto_points, read_records, read_usage
from .runner import ALL_METHODS, LLM_METHOD, BenchResult, EvalRecord, RunConfig, run_benchmark

__all__ = [
    "aggregate", "fallback_percentage", "fallback_report", "mean_ranks", "nrmse", "pareto_frontier",
    "emit_report", "pareto_points", "read_records", "read_usage",
    "ALL_METHODS", "LLM_METHOD", "BenchResult", "EvalRecord", "RunConfig", "run_benchmark",
]
