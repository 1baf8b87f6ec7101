"""Window-by-window imputation through a chat model, with retries and fallback."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..errors import ConfigurationError, TransportError
from ..imputers.base import ImputationResult, categorical_sizes, column_stats
from ..providers import ChatRequest
from ..tabular import RAW, Dataset
from .batching import BatchWindow, plan_batches
from .ledger import ProviderProfile, UsageLedger, UsageRecord, approx_tokens
from .prompt import PromptTemplate, build_prompt, serialize_batch, window_columns
from .validate import parse_and_validate


@dataclass(frozen=True)
class RetryPolicy:
    max_retries: int = 3
    base_delay: float = 1.0
    backoff_factor: float = 2.0

    def __post_init__(self):
        if self.max_retries < 0 or self.base_delay < 0 or self.backoff_factor < 1:
            raise ValueError("invalid retry policy")

    @property
    def max_attempts(self) -> int:
        return 1 + self.max_retries

    def delay(self, retry: int) -> float:
        """Wait before the ``retry``-th retry (1-based)."""
        return self.base_delay * self.backoff_factor ** (retry - 1)

    def delays(self) -> list:
        return [self.delay(i) for i in range(1, self.max_retries + 1)]


def fallback_statistics(train: Dataset) -> np.ndarray:
    """Mean (continuous) / mode (categorical) per feature of a training partition."""
    X = train.values[:, train.feature_indices]
    names = [train.schema[j].name for j in train.feature_indices]
    return column_stats(X, categorical_sizes(train), names)


def _check_transport(transport, profile: ProviderProfile):
    if transport is None or not callable(getattr(transport, "complete", None)):
        raise ConfigurationError("no usable transport configured")
    if profile.tools_enabled:
        raise ConfigurationError("tool use must be disabled")


def impute_batch_with_retries(data: Dataset, window: BatchWindow, profile: ProviderProfile,
                              policy: RetryPolicy, transport, fallback_values: np.ndarray, *,
                              dataset_tag: Optional[str] = None, template: Optional[PromptTemplate] = None,
                              batch_id: int = 0, sleep: Callable[[float], None] = time.sleep):
    """Complete one window; returns (window cell matrix, UsageRecord).

    Observed cells are always copied from ``data``; the model only supplies
    values for cells that were missing.  ``fallback_values`` holds one value
    per non-target feature.
    """
    _check_transport(transport, profile)
    cols = window_columns(data, window)
    source = data.values[window.row_start:window.row_end][:, cols]
    missing = np.isnan(source)
    schema = [data.schema[c] for c in cols]
    bundle = build_prompt(dataset_tag or data.name, serialize_batch(data, window), template)
    request = ChatRequest(bundle.system, bundle.user, temperature=profile.temperature, tools_enabled=False)
    prompt_tokens = approx_tokens(bundle.system + bundle.user)

    tokens_in = tokens_out = 0
    approximate = False
    latency = 0.0
    reasons = []
    attempts = 0
    for attempt in range(1, policy.max_attempts + 1):
        if attempt > 1:
            sleep(policy.delay(attempt - 1))
        attempts = attempt
        try:
            response = transport.complete(request)
        except TransportError as exc:
            reasons.append(type(exc).__name__)
            tokens_in += prompt_tokens
            approximate = True
            continue
        latency += response.latency
        if response.input_tokens is None or response.output_tokens is None:
            approximate = True
        tokens_in += response.input_tokens if response.input_tokens is not None else prompt_tokens
        tokens_out += response.output_tokens if response.output_tokens is not None else approx_tokens(response.text)
        parsed = parse_and_validate(response.text, window, schema)
        if parsed.valid:
            cells = np.where(missing, parsed.cells, source)
            return cells, UsageRecord(batch_id, attempts, tokens_in, tokens_out, "accepted", latency,
                                      approximate, tuple(reasons))
        reasons.append(parsed.reason)

    fill = np.asarray(fallback_values)[list(window.cols)]
    cells = np.where(missing, np.broadcast_to(fill, source.shape), source)
    return cells, UsageRecord(batch_id, attempts, tokens_in, tokens_out, "fallback", latency,
                              approximate, tuple(reasons))


def impute_partition_llm(data: Dataset, fallback_values: np.ndarray, profile: ProviderProfile,
                         policy: RetryPolicy, transport, *, dataset_tag: Optional[str] = None,
                         template: Optional[PromptTemplate] = None, max_in_flight: int = 1,
                         sleep: Callable[[float], None] = time.sleep):
    """Impute a whole partition window by window; returns (ImputationResult, UsageLedger).

    Windows may run concurrently up to ``max_in_flight``; results are
    committed by window index, so completion order never changes the output.
    """
    if data.scale != RAW:
        raise ConfigurationError("the LLM path must receive raw, unnormalised data")
    _check_transport(transport, profile)
    plan = plan_batches(data.n_rows, data.n_features)
    template = template or PromptTemplate.default()
    ledger = UsageLedger()
    t0 = time.perf_counter()

    def run(item):
        i, w = item
        return impute_batch_with_retries(data, w, profile, policy, transport, fallback_values,
                                         dataset_tag=dataset_tag, template=template,
                                         batch_id=i, sleep=sleep)

    items = list(enumerate(plan.windows))
    if max_in_flight > 1:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            results = list(pool.map(run, items))
    else:
        results = [run(it) for it in items]

    values = data.values.copy()
    fallback = np.zeros(data.shape, dtype=bool)
    feats = data.feature_indices
    for (i, w), (cells, record) in zip(items, results):
        cols = [feats[c] for c in w.cols]
        block_missing = np.isnan(values[w.row_start:w.row_end][:, cols])
        values[w.row_start:w.row_end, cols] = cells
        if record.outcome == "fallback":
            sub = fallback[w.row_start:w.row_end]
            sub[:, cols] = block_missing
            fallback[w.row_start:w.row_end] = sub
        ledger.add(record)
    elapsed = time.perf_counter() - t0
    result = ImputationResult(data.with_values(values), fallback, 0.0, elapsed,
                              {"batches": len(plan), "fallbacks": ledger.fallbacks})
    return result, ledger
