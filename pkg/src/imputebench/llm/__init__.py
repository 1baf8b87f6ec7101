"""Prompt-based imputation: batching, prompts, validation, retries and cost."""

from .batching import MAX_COLS, MAX_ROWS, BatchPlan, BatchWindow, expected_batches, plan_batches
from .ledger import (
    BUILTIN_PROFILES,
    ProviderProfile,
    UsageLedger,
    UsageRecord,
    load_profile,
    meter_cost,
)
from .pipeline import RetryPolicy, fallback_statistics, impute_batch_with_retries, impute_partition_llm
from .prompt import MISSING_TOKEN, SYNTHETIC_TAG, PromptBundle, PromptTemplate, build_prompt, serialize_batch
from .validate import ParsedBatch, extract_table, parse_and_validate

__all__ = [
    "MAX_COLS", "MAX_ROWS", "BatchPlan", "BatchWindow", "expected_batches", "plan_batches",
    "BUILTIN_PROFILES", "ProviderProfile", "UsageLedger", "UsageRecord", "load_profile", "meter_cost",
    "RetryPolicy", "fallback_statistics", "impute_batch_with_retries", "impute_partition_llm",
    "MISSING_TOKEN", "SYNTHETIC_TAG", "PromptBundle", "PromptTemplate", "build_prompt", "serialize_batch",
    "ParsedBatch", "extract_table", "parse_and_validate",
]
