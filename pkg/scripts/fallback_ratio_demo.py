"""Scripted mock runs whose fallback share is known in advance.

A window falls back only after every attempt fails, so a script that spends
four invalid responses on some windows and one valid response on the rest
fixes the fallback count exactly.
"""

import argparse

import numpy as np

from imputebench.bench.metrics import fallback_report
from imputebench.llm import BUILTIN_PROFILES, RetryPolicy, fallback_statistics, impute_partition_llm
from imputebench.providers import MockProvider, MockScript
from imputebench.tabular import CATEGORICAL, CONTINUOUS, Dataset, FeatureSchema


def scripted_rate(n_batches: int, n_fail: int, seed: int = 0) -> str:
    rng = np.random.default_rng(seed)
    failing = set(rng.choice(n_batches, n_fail, replace=False).tolist())
    X = rng.normal(size=(40 * n_batches, 3))
    X[rng.random(X.shape) < 0.1] = np.nan
    schema = [FeatureSchema(f"x{j}") for j in range(3)] + [FeatureSchema("y", CATEGORICAL, ("0",), True)]
    data = Dataset("demo", schema, np.column_stack([X, np.zeros(len(X))]))
    script = []
    for b in range(n_batches):
        script += ["invalid"] * 4 if b in failing else ["valid"]
    policy = RetryPolicy(base_delay=0.0)
    _, ledger = impute_partition_llm(data, fallback_statistics(data), BUILTIN_PROFILES["mock"], policy,
                                     MockProvider(MockScript(tuple(script))))
    return fallback_report({"demo": ledger})[0]["fallback_pct"]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("pairs", nargs="*", default=["26/174", "1/54"], help="fallbacks/batches")
    args = ap.parse_args()
    for pair in args.pairs:
        k, n = map(int, pair.split("/"))
        print(f"{k:4d} / {n:4d} batches -> {scripted_rate(n, k)}%")


if __name__ == "__main__":
    main()
