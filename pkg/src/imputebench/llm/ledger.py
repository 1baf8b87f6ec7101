"""Provider pricing profiles, per-request usage records and cost metering."""

from __future__ import annotations

import json
import math
import sys
import threading
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import ConfigurationError, LedgerCorruptionError

BENCHMARK_TEMPERATURE = 0.1


@dataclass(frozen=True)
class ProviderProfile:
    model_id: str
    api_string: str
    price_in: float  # USD per 1e6 input tokens
    price_out: float  # USD per 1e6 output tokens
    temperature: float = BENCHMARK_TEMPERATURE
    tools_enabled: bool = False
    endpoint: Optional[str] = None
    api_key_env: Optional[str] = None
    adapter: str = "openai"

    def __post_init__(self):
        if self.tools_enabled:
            raise ConfigurationError("tool use must be disabled for imputation runs")
        if self.price_in < 0 or self.price_out < 0:
            raise ConfigurationError("prices must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "ProviderProfile":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigurationError(f"unknown provider profile keys: {sorted(extra)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


# List prices (USD per million tokens) of the five hosted models.
BUILTIN_PROFILES = {
    "mimo-v2-flash": ProviderProfile("MiMo-V2-Flash", "xiaomi/mimo-v2-flash", 0.09, 0.29,
                                     endpoint="https://openrouter.ai/api/v1/chat/completions",
                                     api_key_env="OPENROUTER_API_KEY"),
    "devstral-2-2512": ProviderProfile("Devstral 2 2512", "mistralai/devstral-2512", 0.40, 2.00,
                                       endpoint="https://openrouter.ai/api/v1/chat/completions",
                                       api_key_env="OPENROUTER_API_KEY"),
    "gemini-3-flash": ProviderProfile("Gemini 3.0 Flash", "gemini-3-flash", 0.00, 0.00,
                                      endpoint="https://generativelanguage.googleapis.com/v1beta/models/gemini-3-flash:generateContent",
                                      api_key_env="GEMINI_API_KEY", adapter="gemini"),
    "gpt-4.1-nano": ProviderProfile("GPT-4.1-Nano", "openai/gpt-4.1-nano", 0.10, 0.40,
                                    endpoint="https://openrouter.ai/api/v1/chat/completions",
                                    api_key_env="OPENROUTER_API_KEY"),
    "claude-sonnet-4.5": ProviderProfile("Claude 4.5 Sonnet", "claude-sonnet-4.5", 3.00, 6.00,
                                         endpoint="https://api.anthropic.com/v1/messages",
                                         api_key_env="ANTHROPIC_API_KEY", adapter="anthropic"),
    "mock": ProviderProfile("mock", "mock", 0.0, 0.0),
}


def load_profile(path_or_name) -> ProviderProfile:
    """Profile from a JSON/TOML file, or a builtin profile by name."""
    if str(path_or_name) in BUILTIN_PROFILES:
        return BUILTIN_PROFILES[str(path_or_name)]
    path = Path(path_or_name)
    if not path.exists():
        raise ConfigurationError(f"no provider profile {path_or_name!r}")
    if path.suffix == ".toml":
        with open(path, "rb") as fh:
            d = tomllib.load(fh)
    else:
        d = json.loads(path.read_text(encoding="utf-8"))
    return ProviderProfile.from_dict(d)


def approx_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


@dataclass(frozen=True)
class UsageRecord:
    batch_id: int
    attempts: int
    input_tokens: int
    output_tokens: int
    outcome: str  # "accepted" | "fallback"
    latency: float
    approximate: bool = False
    reasons: tuple = ()

    def __post_init__(self):
        if self.outcome not in ("accepted", "fallback"):
            raise ValueError(f"unknown outcome {self.outcome!r}")


@dataclass
class UsageLedger:
    """Append-only list of usage records; totals are always recomputed from it."""

    records: list = field(default_factory=list)

    def __post_init__(self):
        self._lock = threading.Lock()

    def add(self, record: UsageRecord) -> None:
        with self._lock:
            self.records.append(record)

    def extend(self, other: "UsageLedger") -> None:
        with self._lock:
            self.records.extend(other.records)

    @property
    def batches(self) -> int:
        return len(self.records)

    @property
    def input_tokens(self) -> int:
        return sum(r.input_tokens for r in self.records)

    @property
    def output_tokens(self) -> int:
        return sum(r.output_tokens for r in self.records)

    @property
    def fallbacks(self) -> int:
        return sum(r.outcome == "fallback" for r in self.records)

    @property
    def attempts(self) -> int:
        return sum(r.attempts for r in self.records)

    @property
    def fallback_rate(self) -> float:
        return self.fallbacks / self.batches if self.records else 0.0

    @property
    def latency(self) -> float:
        return sum(r.latency for r in self.records)


def meter_cost(ledger: UsageLedger, profile: ProviderProfile) -> float:
    """Dollar cost of every token in the ledger under ``profile``'s linear prices."""
    total_in = total_out = 0
    for r in ledger.records:
        if r.input_tokens < 0 or r.output_tokens < 0:
            raise LedgerCorruptionError(f"negative token count in batch {r.batch_id}")
        total_in += r.input_tokens
        total_out += r.output_tokens
    cost = (Decimal(total_in) * Decimal(str(profile.price_in))
            + Decimal(total_out) * Decimal(str(profile.price_out))) / Decimal(1_000_000)
    return float(cost)
