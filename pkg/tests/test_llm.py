import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_dataset
from imputebench.bench.metrics import fallback_percentage, fallback_report
from imputebench.errors import ConfigurationError, LedgerCorruptionError
from imputebench.llm import (BUILTIN_PROFILES, MAX_COLS, MAX_ROWS, BatchWindow, ProviderProfile, RetryPolicy,
                             UsageLedger, UsageRecord, build_prompt, fallback_statistics, impute_batch_with_retries,
                             impute_partition_llm, meter_cost, parse_and_validate, plan_batches, serialize_batch)
from imputebench.llm.prompt import MISSING_TOKEN, SYNTHETIC_TAG, PromptTemplate
from imputebench.providers import MockProvider, MockScript
from imputebench.tabular import UNIT

MOCK = BUILTIN_PROFILES["mock"]
NO_WAIT = RetryPolicy(base_delay=0.0)


def _window_schema(data, w):
    return [data.schema[data.feature_indices[c]] for c in w.cols]


# ----------------------------------------------------------------- batching

@pytest.mark.parametrize("rows,features,expected", [
    (150 // 5, 4, 1),     # iris
    (178 // 5, 13, 2),    # wine
    (195 // 5, 22, 3),    # parkinsons
    (768 // 5, 8, 4),     # pima
    (80 // 5, 19, 2),     # hepatitis
])
def test_batch_law_reference_shapes(rows, features, expected):
    assert len(plan_batches(rows, features)) == expected


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 300), st.integers(1, 45))
def test_plan_tiles_exactly(rows, features):
    plan = plan_batches(rows, features)
    assert len(plan) == math.ceil(rows / MAX_ROWS) * math.ceil(features / MAX_COLS)
    cover = np.zeros((rows, features), dtype=int)
    for w in plan:
        assert 0 < len(w.rows) <= MAX_ROWS and 0 < len(w.cols) <= MAX_COLS
        cover[w.row_start:w.row_end, w.col_start:w.col_end] += 1
    assert np.all(cover == 1)
    starts = [(w.row_start, w.col_start) for w in plan]
    assert starts == sorted(starts)


def test_window_bounds():
    with pytest.raises(ValueError):
        BatchWindow(0, 41, 0, 1)
    with pytest.raises(ValueError):
        BatchWindow(0, 1, 0, 0)


# ----------------------------------------------------------------- serialisation / prompt

def test_serialize_missing_tokens():
    d = make_dataset(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert MISSING_TOKEN not in serialize_batch(d, BatchWindow(0, 2, 0, 2))
    d = make_dataset(np.array([[1.0, np.nan], [3.0, 4.0]]))
    text = serialize_batch(d, BatchWindow(0, 2, 0, 2))
    assert text.count(MISSING_TOKEN) == 1
    assert text.splitlines()[0] == "f0,f1"


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40), st.integers(1, 10), st.integers(0, 10**6))
def test_serialize_parse_round_trip(n, p, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p)) * 10.0 ** rng.integers(-3, 4, size=p)
    d = make_dataset(X)
    w = BatchWindow(0, n, 0, p)
    parsed = parse_and_validate(serialize_batch(d, w), w, _window_schema(d, w))
    assert parsed.valid
    np.testing.assert_allclose(parsed.cells, X, rtol=5e-6, atol=0)


def test_prompt_blocks():
    b = build_prompt(SYNTHETIC_TAG, "a,b\n1,<MISSING>")
    assert "I am providing a subset of the dataset" in b.text
    assert "Synthetic" in b.intro
    low = b.constraints_block.lower()
    assert "do not execute code" in low and "do not explain" in low
    assert "nan" in low and "?" in low
    order = [b.persona, b.intro, b.task, b.constraints_block, b.output_format_block, b.strict_rules_block,
             b.payload_block]
    pos = [b.text.index(block) for block in order]
    assert pos == sorted(pos)
    assert "data analyst" in b.system.lower()


def test_prompt_total_on_empty_payload():
    b = build_prompt("iris", "")
    assert "I am providing a subset of the dataset" in b.text
    with pytest.raises(ValueError):
        build_prompt("", "x")


def test_prompt_template_from_file(tmp_path):
    src = PromptTemplate.default()
    p = tmp_path / "t.toml"
    body = "\n".join(f'{k} = """{getattr(src, k)}"""' for k in src.__dataclass_fields__)
    p.write_text(body.replace('persona = """', 'persona = """Custom. '))
    t = PromptTemplate.from_file(p)
    assert build_prompt("x", "a\n1", t).persona.startswith("Custom.")


# ----------------------------------------------------------------- validation

def _square():
    d = make_dataset(np.array([[1.0, np.nan], [3.0, 4.0]]))
    w = BatchWindow(0, 2, 0, 2)
    return d, w, _window_schema(d, w)


@pytest.mark.parametrize("text,reason", [
    ("f0\n1\n3", "shape-mismatch"),
    ("f0,f1\n1,NaN\n3,4", "missing-marker-present"),
    ("f0,f1\n1,?\n3,4", "missing-marker-present"),
    ("f0,f1\n1,two\n3,4", "non-numeric"),
    ("I cannot help with that.", "unparseable"),
    ("", "unparseable"),
])
def test_validator_verdicts(text, reason):
    _, w, schema = _square()
    parsed = parse_and_validate(text, w, schema)
    assert not parsed.valid and parsed.reason == reason


def test_validator_accepts_fenced_and_prose():
    _, w, schema = _square()
    body = "f0,f1\n1,2.5\n3,4"
    for text in (body, f"```csv\n{body}\n```", f"Sure! Here you go:\n\n{body}\n\nHope this helps."):
        parsed = parse_and_validate(text, w, schema)
        assert parsed.valid
        np.testing.assert_array_equal(parsed.cells, [[1, 2.5], [3, 4]])


def test_validator_categories():
    d = make_dataset(np.array([[0.0], [1.0]]), categorical={0: 2})
    w = BatchWindow(0, 2, 0, 1)
    schema = _window_schema(d, w)
    assert parse_and_validate("c0\nL0\nL1", w, schema).valid
    bad = parse_and_validate("c0\nL0\nL7", w, schema)
    assert bad.reason == "unknown-category"


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=300))
def test_validator_is_total(text):
    _, w, schema = _square()
    parsed = parse_and_validate(text, w, schema)
    assert parsed.valid or parsed.reason in ("shape-mismatch", "non-numeric", "unknown-category",
                                             "missing-marker-present", "unparseable")


# ----------------------------------------------------------------- retries and fallback

def test_retry_delays():
    assert RetryPolicy().delays() == [1.0, 2.0, 4.0]
    assert RetryPolicy().max_attempts == 4


def test_happy_path():
    d, w, _ = _square()
    cells, rec = impute_batch_with_retries(d, w, MOCK, NO_WAIT, MockProvider(MockScript(("valid",))),
                                           fallback_statistics(d))
    assert rec.attempts == 1 and rec.outcome == "accepted"
    assert not np.isnan(cells).any()


def test_four_invalid_responses_fall_back_to_train_means():
    X = np.array([[1.0, np.nan], [3.0, 4.0], [np.nan, 8.0]])
    d = make_dataset(X)
    train = make_dataset(np.array([[10.0, 1.0], [20.0, 3.0]]))
    waits = []
    provider = MockProvider(MockScript(("invalid",) * 4))
    cells, rec = impute_batch_with_retries(d, BatchWindow(0, 3, 0, 2), MOCK, RetryPolicy(), provider,
                                           fallback_statistics(train), sleep=waits.append)
    assert rec.attempts == 4 and provider.calls == 4
    assert rec.outcome == "fallback"
    assert waits == [1.0, 2.0, 4.0]
    np.testing.assert_array_equal(cells, [[1.0, 2.0], [3.0, 4.0], [15.0, 8.0]])
    ledger = UsageLedger([rec])
    assert ledger.fallback_rate == 1.0


def test_transport_errors_share_the_retry_path():
    d, w, _ = _square()
    waits = []
    provider = MockProvider(MockScript(("timeout", "rate-limit", "refused", "valid")))
    _, rec = impute_batch_with_retries(d, w, MOCK, RetryPolicy(), provider, fallback_statistics(d),
                                       sleep=waits.append)
    assert rec.outcome == "accepted" and rec.attempts == 4
    assert rec.reasons == ("TransportTimeout", "RateLimited", "ConnectionRefused")
    assert waits == [1.0, 2.0, 4.0]


def test_misconfigured_transport():
    d, w, _ = _square()
    with pytest.raises(ConfigurationError):
        impute_batch_with_retries(d, w, MOCK, NO_WAIT, None, fallback_statistics(d))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from(["valid", "drop-column", "inject-nan", "timeout", "garbage", "non-numeric"]),
                min_size=1, max_size=8), st.integers(0, 3))
def test_attempt_bound_and_observed_cells(script, retries):
    rng = np.random.default_rng(len(script))
    X = rng.normal(size=(12, 3))
    X[rng.random(X.shape) < 0.3] = np.nan
    X[0] = 1.0
    d = make_dataset(X)
    policy = RetryPolicy(max_retries=retries, base_delay=0.0)
    res, ledger = impute_partition_llm(d, fallback_statistics(d), MOCK, policy, MockProvider(MockScript(script)))
    assert all(r.attempts <= 1 + retries for r in ledger.records)
    obs = ~np.isnan(d.values)
    np.testing.assert_array_equal(res.completed.values[obs], d.values[obs])
    assert not np.isnan(res.completed.values).any()
    assert ledger.input_tokens == sum(r.input_tokens for r in ledger.records)
    assert ledger.fallback_rate == sum(r.outcome == "fallback" for r in ledger.records) / ledger.batches


def test_partition_determinism_and_concurrency():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(95, 13))
    X[rng.random(X.shape) < 0.1] = np.nan
    d = make_dataset(X)
    stats = fallback_statistics(d)
    script = MockScript(("valid", "drop-column", "valid", "inject-nan", "prose-wrap"), seed=2)
    runs = [impute_partition_llm(d, stats, MOCK, NO_WAIT, MockProvider(script), max_in_flight=m)
            for m in (1, 1)]
    assert runs[0][0].completed.equals(runs[1][0].completed)
    strip = lambda lg: [(r.batch_id, r.attempts, r.input_tokens, r.output_tokens, r.outcome, r.reasons)
                        for r in lg.records]
    assert strip(runs[0][1]) == strip(runs[1][1])
    par = impute_partition_llm(d, stats, MOCK, NO_WAIT, MockProvider(MockScript(("valid",))), max_in_flight=4)
    seq = impute_partition_llm(d, stats, MOCK, NO_WAIT, MockProvider(MockScript(("valid",))))
    assert par[0].completed.equals(seq[0].completed)
    assert len(seq[1].records) == 6


def test_llm_path_rejects_normalised_data():
    d = make_dataset(np.ones((3, 2))).with_values(np.ones((3, 3)) * 0.0, scale=UNIT)
    with pytest.raises(ConfigurationError):
        impute_partition_llm(d, np.zeros(2), MOCK, NO_WAIT, MockProvider(MockScript(("valid",))))


def test_scripted_fallback_ratio():
    # 54 windows; the first exhausts its four attempts, the rest succeed at once
    X = np.arange(54 * 40 * 2, dtype=float).reshape(54 * 40, 2)
    X[::3, 1] = np.nan
    d = make_dataset(X)
    script = MockScript(("invalid",) * 4 + ("valid",))
    _, ledger = impute_partition_llm(d, fallback_statistics(d), MOCK, NO_WAIT, MockProvider(script))
    assert ledger.batches == 54 and ledger.fallbacks == 1
    assert fallback_report({"devstral": ledger})[0]["fallback_pct"] == "1.85"


def test_fallback_percentages():
    assert fallback_percentage(26, 174) == "14.94"
    assert fallback_percentage(0, 10) == "0.00"


# ----------------------------------------------------------------- cost

def test_cost_examples():
    mimo, claude = BUILTIN_PROFILES["mimo-v2-flash"], BUILTIN_PROFILES["claude-sonnet-4.5"]
    assert meter_cost(UsageLedger([UsageRecord(0, 1, 1_000_000, 0, "accepted", 0.0)]), mimo) == 0.09
    assert meter_cost(UsageLedger([UsageRecord(0, 1, 500_000, 250_000, "accepted", 0.0)]), claude) == 3.00
    assert meter_cost(UsageLedger(), claude) == 0.0


def test_cost_linear_and_guarded():
    p = BUILTIN_PROFILES["gpt-4.1-nano"]
    recs = [UsageRecord(i, 1, 1000 * i, 300 * i, "accepted", 0.0) for i in range(1, 6)]
    whole = meter_cost(UsageLedger(recs), p)
    parts = sum(meter_cost(UsageLedger([r]), p) for r in recs)
    assert whole == pytest.approx(parts, rel=1e-12)
    with pytest.raises(LedgerCorruptionError):
        meter_cost(UsageLedger([UsageRecord(0, 1, -1, 0, "accepted", 0.0)]), p)


def test_profile_rules():
    with pytest.raises(ConfigurationError):
        ProviderProfile("m", "m", 0.1, 0.1, tools_enabled=True)
    prices = {k: (v.price_in, v.price_out) for k, v in BUILTIN_PROFILES.items()}
    assert prices["devstral-2-2512"] == (0.40, 2.00)
    assert prices["gemini-3-flash"] == (0.0, 0.0)
    assert all(v.temperature == 0.1 for v in BUILTIN_PROFILES.values())
