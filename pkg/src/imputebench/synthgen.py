"""Seeded synthetic classification datasets and the nine-dataset suite.

The generator follows the usual hypercube-cluster recipe: informative
features are Gaussian clusters around hypercube vertices (scaled by
``class_sep``) with a random per-cluster linear mixing, repeated features
copy informative ones, and the rest is standard-normal noise.  All draws come
from :class:`~imputebench.rng.PortableRNG`.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import SpecError
from .rng import PortableRNG, derive_seed
from .tabular import CATEGORICAL, CONTINUOUS, Dataset, FeatureSchema, load_csv, write_csv

FEATURE_MIXES = ("continuous", "categorical", "mixed")


class ReducedBinsWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SynthSpec:
    name: str
    n_samples: int
    n_features: int
    n_informative: int
    n_repeated: int = 0
    n_clusters_per_class: int = 1
    class_sep: float = 1.0
    n_classes: int = 2
    feature_mix: str = "continuous"
    seed: int = 0
    n_bins: int = 4

    def __post_init__(self):
        if self.feature_mix not in FEATURE_MIXES:
            raise SpecError(f"unknown feature mix {self.feature_mix!r}")
        if self.n_informative < 1 or self.n_features < 1 or self.n_classes < 2:
            raise SpecError("need n_informative >= 1, n_features >= 1 and n_classes >= 2")
        if self.n_informative + self.n_repeated > self.n_features:
            raise SpecError("n_informative + n_repeated exceeds n_features")
        n_clusters = self.n_classes * self.n_clusters_per_class
        if self.n_samples < n_clusters:
            raise SpecError("n_samples must be at least n_classes * n_clusters_per_class")
        if n_clusters > 2 ** self.n_informative:
            raise SpecError(f"{n_clusters} clusters do not fit on a {self.n_informative}-dimensional hypercube")


def generate_classification(spec: SynthSpec) -> Dataset:
    rng = PortableRNG(spec.seed)
    n, n_inf = spec.n_samples, spec.n_informative
    n_clusters = spec.n_classes * spec.n_clusters_per_class

    vertices = rng.choice(2 ** n_inf, n_clusters)
    bits = (vertices[:, None] >> np.arange(n_inf)[None, :]) & 1
    centroids = (2.0 * bits - 1.0) * spec.class_sep

    sizes = np.full(n_clusters, n // n_clusters)
    sizes[: n % n_clusters] += 1

    X = np.empty((n, spec.n_features))
    y = np.empty(n)
    start = 0
    for k in range(n_clusters):
        stop = start + sizes[k]
        block = rng.normal((sizes[k], n_inf))
        mixing = 2.0 * rng.uniform(n_inf * n_inf).reshape(n_inf, n_inf) - 1.0
        X[start:stop, :n_inf] = block @ mixing + centroids[k]
        y[start:stop] = k % spec.n_classes
        start = stop

    if spec.n_repeated:
        sources = rng.integers(n_inf, spec.n_repeated)
        for i, src in enumerate(sources):
            X[:, n_inf + i] = X[:, src]
    n_noise = spec.n_features - n_inf - spec.n_repeated
    if n_noise:
        X[:, n_inf + spec.n_repeated:] = rng.normal((n, n_noise))

    perm = rng.permutation(n)
    X, y = X[perm], y[perm]

    schema = [FeatureSchema(f"x{j}", CONTINUOUS) for j in range(spec.n_features)]
    schema.append(FeatureSchema("target", CATEGORICAL, tuple(str(c) for c in range(spec.n_classes)), True))
    data = Dataset(spec.name, tuple(schema), np.column_stack([X, y]))

    if spec.feature_mix == "categorical":
        data = discretize_to_categorical(data, data.feature_indices, spec.n_bins)
    elif spec.feature_mix == "mixed":
        data = discretize_to_categorical(data, data.feature_indices[: spec.n_features // 2], spec.n_bins)
    return data


def discretize_to_categorical(data: Dataset, columns, n_bins: int) -> Dataset:
    """Equal-frequency binning of continuous columns into labels q0, q1, ...

    Tied values always share a bin; when that leaves fewer than ``n_bins``
    non-empty bins a :class:`ReducedBinsWarning` is issued.
    """
    if n_bins < 2:
        raise SpecError("n_bins must be at least 2")
    values = data.values.copy()
    schema = list(data.schema)
    for j in columns:
        s = schema[j]
        if s.is_categorical or s.is_target:
            raise SpecError(f"column {s.name!r} is not a continuous feature")
        col = values[:, j]
        obs = ~np.isnan(col)
        v = col[obs]
        if v.size == 0:
            raise SpecError(f"column {s.name!r} has no observed values")
        sorted_v = np.sort(v)
        first_rank = np.searchsorted(sorted_v, v, side="left")
        raw_bin = (first_rank * n_bins) // v.size
        present = np.unique(raw_bin)
        if present.size < n_bins:
            warnings.warn(f"column {s.name!r}: only {present.size} of {n_bins} bins are populated",
                          ReducedBinsWarning, stacklevel=2)
        codes = np.searchsorted(present, raw_bin)
        col = np.full(col.shape, np.nan)
        col[obs] = codes
        values[:, j] = col
        schema[j] = FeatureSchema(s.name, CATEGORICAL, tuple(f"q{b}" for b in range(present.size)))
    return data.with_schema(schema, values)


def suite_specs(master_seed: int) -> list:
    table = json.loads(resources.files("imputebench").joinpath("data/synth_suite.json").read_text())
    return [
        SynthSpec(seed=derive_seed(master_seed, "synth", row["name"]), n_bins=table["n_bins"],
                  **{k: v for k, v in row.items()})
        for row in table["datasets"]
    ]


def table1_suite(master_seed: int = 0) -> list:
    return [generate_classification(s) for s in suite_specs(master_seed)]


def write_suite(out_dir, master_seed: int = 0) -> Path:
    """Write the nine CSVs plus ``manifest.json``; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for spec in suite_specs(master_seed):
        data = generate_classification(spec)
        fname = f"{spec.name}.csv"
        write_csv(data, out / fname)
        entries.append({
            "name": spec.name,
            "file": fname,
            "seed": spec.seed,
            "spec": asdict(spec),
            "schema": [s.to_dict() for s in data.schema],
        })
    manifest = out / "manifest.json"
    manifest.write_text(json.dumps({"master_seed": master_seed, "datasets": entries}, indent=2) + "\n")
    return manifest


def load_manifest(path) -> list:
    path = Path(path)
    meta = json.loads(path.read_text())
    out = []
    for e in meta["datasets"]:
        schema = [FeatureSchema.from_dict(d) for d in e["schema"]]
        out.append(load_csv(path.parent / e["file"], schema_hint=schema, name=e["name"]))
    return out
