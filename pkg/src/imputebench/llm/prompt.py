"""Batch serialisation and prompt assembly."""

from __future__ import annotations

import csv
import io
import sys
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..tabular import Dataset
from .batching import BatchWindow

MISSING_TOKEN = "<MISSING>"
SYNTHETIC_TAG = "Synthetic"
BLOCK_ORDER = ("persona", "intro", "task", "constraints", "output_format", "strict_rules", "payload")


def format_number(v: float) -> str:
    return f"{v:.6g}"


def window_columns(data: Dataset, window: BatchWindow) -> list:
    """Absolute column indices covered by a window."""
    feats = data.feature_indices
    return [feats[c] for c in window.cols]


def serialize_batch(data: Dataset, window: BatchWindow) -> str:
    """CSV text of the window: header of column names, missing cells as <MISSING>."""
    cols = window_columns(data, window)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([data.schema[c].name for c in cols])
    for r in window.rows:
        row = []
        for c in cols:
            v = data.values[r, c]
            s = data.schema[c]
            if np.isnan(v):
                row.append(MISSING_TOKEN)
            elif s.is_categorical:
                row.append(s.categories[int(v)])
            else:
                row.append(format_number(v))
        w.writerow(row)
    return buf.getvalue().rstrip("\n")


@dataclass(frozen=True)
class PromptTemplate:
    persona: str
    intro: str
    task: str
    constraints: str
    output_format: str
    strict_rules: str
    payload: str

    @classmethod
    def from_file(cls, path) -> "PromptTemplate":
        with open(path, "rb") as fh:
            d = tomllib.load(fh)
        return cls(**{f.name: d[f.name] for f in fields(cls)})

    @classmethod
    def default(cls) -> "PromptTemplate":
        ref = resources.files("imputebench").joinpath("data/prompt.toml")
        d = tomllib.loads(ref.read_text(encoding="utf-8"))
        return cls(**{f.name: d[f.name] for f in fields(cls)})


@dataclass(frozen=True)
class PromptBundle:
    persona: str
    dataset_tag: str
    intro: str
    task: str
    constraints_block: str
    output_format_block: str
    strict_rules_block: str
    payload: str
    payload_block: str

    @property
    def system(self) -> str:
        return self.persona

    @property
    def user(self) -> str:
        return "\n\n".join([self.intro, self.task, self.constraints_block, self.output_format_block,
                            self.strict_rules_block, self.payload_block])

    @property
    def text(self) -> str:
        return self.persona + "\n\n" + self.user


def _payload_shape(payload: str):
    lines = [ln for ln in payload.splitlines() if ln.strip()]
    if not lines:
        return 0, 0
    return len(lines) - 1, len(next(csv.reader([lines[0]])))


def build_prompt(dataset_tag: str, payload: str, template: PromptTemplate = None) -> PromptBundle:
    if not dataset_tag:
        raise ValueError("dataset_tag must be non-empty")
    template = template or PromptTemplate.default()
    n_rows, n_cols = _payload_shape(payload)
    ctx = {"dataset_tag": dataset_tag, "n_rows": n_rows, "n_cols": n_cols, "payload": payload}

    def render(block: str) -> str:
        return block.format(**ctx).strip()

    return PromptBundle(
        persona=render(template.persona),
        dataset_tag=dataset_tag,
        intro=render(template.intro),
        task=render(template.task),
        constraints_block=render(template.constraints),
        output_format_block=render(template.output_format),
        strict_rules_block=render(template.strict_rules),
        payload=payload,
        payload_block=render(template.payload),
    )


def load_template(path=None) -> PromptTemplate:
    return PromptTemplate.from_file(Path(path)) if path else PromptTemplate.default()
