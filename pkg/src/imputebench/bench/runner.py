"""Experiment grid: folds x mechanisms x rates x methods, scored by NRMSE."""

from __future__ import annotations

import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..amputation import MECHANISMS, AmputationSpec, ampute
from ..errors import ConfigurationError, ImputeBenchError, SpecError
from ..imputers import METHODS as CLASSICAL_METHODS
from ..imputers import ImputerConfig, impute
from ..llm.ledger import BENCHMARK_TEMPERATURE, ProviderProfile, UsageLedger, load_profile, meter_cost
from ..llm.pipeline import RetryPolicy, fallback_statistics, impute_partition_llm
from ..llm.prompt import SYNTHETIC_TAG, load_template
from ..providers import EndpointConfig, HttpChatClient, MockProvider, MockScript
from ..rng import derive_seed
from ..synthgen import load_manifest, table1_suite
from ..tabular import RAW, UNIT, Dataset, apply_mask, apply_normalizer, fit_normalizer, load_csv, stratified_kfold
from .metrics import nrmse

log = logging.getLogger(__name__)

LLM_METHOD = "llm"
ALL_METHODS = CLASSICAL_METHODS + (LLM_METHOD,)
PARTITIONS = ("train", "test")


@dataclass(frozen=True)
class EvalRecord:
    dataset: str
    mechanism: str
    rate: float
    method: str
    fold: int
    partition: str
    nrmse: float
    runtime: float
    fallback_count: int = 0
    cost: float = 0.0

    def __post_init__(self):
        if self.nrmse < 0 or self.runtime < 0:
            raise ValueError("nrmse and runtime must be non-negative")

    @property
    def key(self):
        return (self.dataset, self.mechanism, self.rate, self.fold, self.method, self.partition)


@dataclass
class RunConfig:
    datasets: tuple
    mechanisms: tuple = MECHANISMS
    rates: tuple = (0.05, 0.10, 0.20)
    methods: tuple = ("mean", "knn", "mice", "softimpute", "missforest")
    k_folds: int = 5
    master_seed: int = 0
    provider: str = "mock"
    mock_script: Optional[str] = None
    prompt_template: Optional[str] = None
    output_dir: str = "results"
    record_timing: bool = True
    n_jobs: int = 1
    max_in_flight: int = 1
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    base_dir: str = "."

    def __post_init__(self):
        self.datasets = tuple(self.datasets)
        self.mechanisms = tuple(m.upper() for m in self.mechanisms)
        self.rates = tuple(float(r) for r in self.rates)
        self.methods = tuple(self.methods)
        if not (self.datasets and self.mechanisms and self.rates and self.methods):
            raise SpecError("datasets, mechanisms, rates and methods must all be non-empty")
        if any(not 0 < r < 1 for r in self.rates):
            raise SpecError("rates must lie in (0, 1)")
        bad = [m for m in self.mechanisms if m not in MECHANISMS]
        if bad:
            raise SpecError(f"unknown mechanisms {bad}")
        bad = [m for m in self.methods if m not in ALL_METHODS]
        if bad:
            raise SpecError(f"unknown methods {bad}")
        if self.k_folds < 2:
            raise SpecError("k_folds must be at least 2")
        if isinstance(self.retry, dict):
            self.retry = RetryPolicy(**self.retry)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        if path.suffix == ".toml":
            with open(path, "rb") as fh:
                d = tomllib.load(fh)
        else:
            d = json.loads(path.read_text(encoding="utf-8"))
        d.setdefault("base_dir", str(path.parent))
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise SpecError(f"unknown run-config keys: {sorted(unknown)}")
        return cls(**d)

    def resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k not in ("base_dir", "output_dir")}
        d["retry"] = {"max_retries": self.retry.max_retries, "base_delay": self.retry.base_delay,
                      "backoff_factor": self.retry.backoff_factor}
        d["datasets"] = [x if isinstance(x, str) else dict(x) for x in self.datasets]
        for k in ("mechanisms", "rates", "methods"):
            d[k] = list(d[k])
        return d


@dataclass
class BenchResult:
    records: list
    ledgers: dict  # (dataset, mechanism, rate, fold, method, partition) -> UsageLedger
    failures: list
    access_log: set
    config: RunConfig
    profile: Optional[ProviderProfile] = None
    synthetic: set = field(default_factory=set)

    @property
    def ok(self) -> bool:
        return not self.failures


def load_datasets(cfg: RunConfig) -> list:
    """Resolve dataset entries; returns a list of (Dataset, is_synthetic)."""
    out = []
    suite = None
    for entry in cfg.datasets:
        if isinstance(entry, dict):
            out.append((load_csv(cfg.resolve(entry["path"]), target=entry.get("target"),
                                 name=entry.get("name")), bool(entry.get("synthetic", False))))
            continue
        if entry == "suite" or entry.startswith("suite:"):
            if suite is None:
                suite = {d.name: d for d in table1_suite(cfg.master_seed)}
            names = list(suite) if entry == "suite" else [entry.split(":", 1)[1]]
            for n in names:
                if n not in suite:
                    raise ConfigurationError(f"no synthetic dataset named {n!r}")
                out.append((suite[n], True))
        elif entry.endswith(".json"):
            out.extend((d, True) for d in load_manifest(cfg.resolve(entry)))
        else:
            out.append((load_csv(cfg.resolve(entry)), False))
    names = [d.name for d, _ in out]
    if len(set(names)) != len(names):
        raise ConfigurationError(f"duplicate dataset names in {names}")
    return out


def value_ranges(train: Dataset, params, space: str) -> dict:
    """Per-feature (min, max) of the complete training fold in the given space."""
    ranges = {}
    for j in train.feature_indices:
        s = train.schema[j]
        if s.is_categorical:
            col = train.values[:, j]
            col = col[~np.isnan(col)]
            ranges[j] = (float(col.min()), float(col.max())) if col.size else (0.0, 0.0)
        elif space == UNIT:
            lo, hi = params.ranges[j]
            ranges[j] = (0.0, 1.0) if hi > lo else (0.0, 0.0)
        else:
            ranges[j] = params.ranges[j]
    return ranges


class _Grid:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.profile = None
        self.script = None
        self.template = None
        if LLM_METHOD in cfg.methods:
            self.profile = load_profile(cfg.provider)
            if self.profile.temperature != BENCHMARK_TEMPERATURE:
                raise ConfigurationError(f"benchmark runs fix temperature at {BENCHMARK_TEMPERATURE}")
            if cfg.provider == "mock" or self.profile.api_string == "mock":
                self.script = (MockScript.from_file(cfg.resolve(cfg.mock_script)) if cfg.mock_script
                               else MockScript(("echo-valid",)))
            elif not self.profile.endpoint:
                raise ConfigurationError("provider profile has no endpoint")
            self.template = load_template(cfg.resolve(cfg.prompt_template) if cfg.prompt_template else None)
        self.access_log = set()

    def transport(self):
        if self.script is not None:
            return MockProvider(self.script)  # fresh per partition: the script restarts
        p = self.profile
        return HttpChatClient(EndpointConfig(p.endpoint, p.api_string, p.adapter, p.api_key_env))

    def run_fold(self, data: Dataset, synthetic: bool, folds, fold: int):
        cfg = self.cfg
        records, ledgers, failures = [], {}, []
        tr_idx, te_idx = folds.split(fold)
        raw = {"train": data.subset(tr_idx), "test": data.subset(te_idx)}
        params = fit_normalizer(raw["train"])
        unit = {p: apply_normalizer(raw[p], params) for p in PARTITIONS}
        ranges = {RAW: value_ranges(raw["train"], params, RAW), UNIT: value_ranges(raw["train"], params, UNIT)}
        for mech in cfg.mechanisms:
            for rate in cfg.rates:
                cell_seed = derive_seed(cfg.master_seed, data.name, mech, rate, fold)
                try:
                    amp = {}
                    for p in PARTITIONS:
                        out = ampute(raw[p], AmputationSpec(mech, rate, derive_seed(cell_seed, p)))
                        amp[p] = {RAW: apply_mask(raw[p], out.mask), UNIT: apply_mask(unit[p], out.mask)}
                except (ImputeBenchError, ValueError) as exc:
                    for m in cfg.methods:
                        failures.append(self._failure(data.name, mech, rate, fold, m, "amputation", exc))
                    continue
                for method in cfg.methods:
                    try:
                        if method == LLM_METHOD:
                            recs, lgs = self._run_llm(data.name, synthetic, mech, rate, fold, amp, ranges[RAW])
                            ledgers.update(lgs)
                        else:
                            recs = self._run_classical(data.name, method, mech, rate, fold, cell_seed, amp,
                                                       ranges[UNIT])
                        records.extend(recs)
                    except (ImputeBenchError, ValueError, np.linalg.LinAlgError) as exc:
                        failures.append(self._failure(data.name, mech, rate, fold, method, "impute", exc))
        return records, ledgers, failures

    @staticmethod
    def _failure(dataset, mech, rate, fold, method, stage, exc):
        log.warning("%s %s %.2f fold %d %s failed at %s: %s", dataset, mech, rate, fold, method, stage, exc)
        return {"dataset": dataset, "mechanism": mech, "rate": rate, "fold": fold, "method": method,
                "stage": stage, "error": f"{type(exc).__name__}: {exc}"}

    def _runtime(self, seconds: float) -> float:
        return float(seconds) if self.cfg.record_timing else 0.0

    def _run_classical(self, name, method, mech, rate, fold, seed, amp, ranges):
        train, test = amp["train"][UNIT][0], amp["test"][UNIT][0]
        if train.scale != UNIT or test.scale != UNIT:
            raise ConfigurationError("classical imputers must receive normalised data")
        self.access_log.add((method, train.scale))
        tr, te = impute(train, test, ImputerConfig(method=method, seed=seed))
        out = []
        for part, res, runtime in (("train", tr, tr.fit_runtime), ("test", te, te.transform_runtime)):
            truth = amp[part][UNIT][1]
            out.append(EvalRecord(name, mech, rate, method, fold, part, nrmse(truth, res.completed, ranges),
                                  self._runtime(runtime), res.fallback_count, 0.0))
        return out

    def _run_llm(self, name, synthetic, mech, rate, fold, amp, ranges):
        cfg = self.cfg
        fill = fallback_statistics(amp["train"][RAW][0])
        tag = SYNTHETIC_TAG if synthetic else name
        out, ledgers = [], {}
        for part in PARTITIONS:
            data, truth = amp[part][RAW]
            self.access_log.add((LLM_METHOD, data.scale))
            res, ledger = impute_partition_llm(data, fill, self.profile, cfg.retry, self.transport(),
                                               dataset_tag=tag, template=self.template,
                                               max_in_flight=cfg.max_in_flight)
            ledgers[(name, mech, rate, fold, LLM_METHOD, part)] = ledger
            out.append(EvalRecord(name, mech, rate, LLM_METHOD, fold, part, nrmse(truth, res.completed, ranges),
                                  self._runtime(res.transform_runtime), ledger.fallbacks,
                                  meter_cost(ledger, self.profile)))
        return out, ledgers


def record_sort_key(r: EvalRecord):
    return (r.dataset, r.mechanism, r.rate, r.fold, r.method, r.partition)


def run_benchmark(cfg: RunConfig) -> BenchResult:
    """Run the whole grid; per-cell failures are collected, never raised."""
    grid = _Grid(cfg)
    datasets = load_datasets(cfg)
    jobs = []
    fold_failures = []
    for data, synthetic in datasets:
        try:
            folds = stratified_kfold(data, cfg.k_folds, derive_seed(cfg.master_seed, "folds", data.name))
        except (ImputeBenchError, ValueError) as exc:
            fold_failures.append(_Grid._failure(data.name, "*", 0.0, -1, "*", "folds", exc))
            continue
        jobs.extend((data, synthetic, folds, f) for f in range(cfg.k_folds))

    if cfg.n_jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.n_jobs) as pool:
            results = list(pool.map(lambda j: grid.run_fold(*j), jobs))
    else:
        results = [grid.run_fold(*j) for j in jobs]

    records, ledgers, failures = [], {}, list(fold_failures)
    for recs, lgs, fails in results:
        records.extend(recs)
        ledgers.update(lgs)
        failures.extend(fails)
    records.sort(key=record_sort_key)
    failures.sort(key=lambda f: (f["dataset"], f["mechanism"], f["rate"], f["fold"], f["method"]))
    ledgers = dict(sorted(ledgers.items(), key=lambda kv: tuple(map(str, kv[0]))))
    return BenchResult(records, ledgers, failures, grid.access_log, cfg, grid.profile,
                       {d.name for d, s in datasets if s})


def with_overrides(cfg: RunConfig, **kw) -> RunConfig:
    kw = {k: v for k, v in kw.items() if v is not None}
    return replace(cfg, **kw) if kw else cfg
