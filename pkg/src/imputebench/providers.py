"""Chat-completion transports: an HTTP client and a scriptable mock.

A transport is any object with ``complete(ChatRequest) -> ChatResponse``.
Network trouble is raised as a :class:`~imputebench.errors.TransportError`
subclass so the retry loop can tell it apart from malformed content.
"""

from __future__ import annotations

import csv
import io
import json
import os
import random
import socket
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import (
    ConfigurationError,
    ConnectionRefused,
    RateLimited,
    TransportError,
    TransportTimeout,
)


@dataclass(frozen=True)
class ChatRequest:
    system: str
    user: str
    temperature: float = 0.1
    max_output_tokens: Optional[int] = None
    tools_enabled: bool = False


@dataclass(frozen=True)
class ChatResponse:
    text: str
    input_tokens: Optional[int] = None
    output_tokens: Optional[int] = None
    latency: float = 0.0

    def __post_init__(self):
        for v in (self.input_tokens, self.output_tokens):
            if v is not None and v < 0:
                raise ValueError("token counts must be non-negative")


# --------------------------------------------------------------------- mock

MOCK_BEHAVIORS = ("echo-valid", "drop-column", "inject-nan", "prose-wrap", "timeout", "delay",
                  "non-numeric", "unknown-category", "garbage", "rate-limit", "refused")

_ALIASES = {
    "valid": "echo-valid",
    "invalid:shape-mismatch": "drop-column",
    "invalid:missing-marker-present": "inject-nan",
    "invalid:non-numeric": "non-numeric",
    "invalid:unknown-category": "unknown-category",
    "invalid:unparseable": "garbage",
    "invalid": "drop-column",
}


def parse_behavior(token: str):
    """Normalise one script token to (kind, argument)."""
    tok = token.strip()
    low = tok.lower()
    if low in _ALIASES:
        return _ALIASES[low], None
    if low.startswith("garbage:"):
        return "garbage", tok[len("garbage:"):]
    if low.startswith("delay(") and low.endswith(")"):
        return "delay", float(low[6:-1])
    if low.startswith("delay:"):
        return "delay", float(low[6:])
    if low in MOCK_BEHAVIORS:
        return low, None
    raise ValueError(f"unknown mock behaviour {token!r}")


@dataclass(frozen=True)
class MockScript:
    behaviors: tuple
    seed: int = 0

    def __post_init__(self):
        parsed = tuple(b if isinstance(b, tuple) else parse_behavior(b) for b in self.behaviors)
        if not parsed:
            raise ValueError("mock script needs at least one behaviour")
        object.__setattr__(self, "behaviors", parsed)

    @classmethod
    def from_text(cls, text: str, seed: int = 0) -> "MockScript":
        lines = [ln.strip() for ln in text.splitlines()]
        return cls(tuple(ln for ln in lines if ln and not ln.startswith("#")), seed)

    @classmethod
    def from_file(cls, path, seed: int = 0) -> "MockScript":
        return cls.from_text(Path(path).read_text(encoding="utf-8"), seed)

    def behavior(self, index: int):
        return self.behaviors[min(index, len(self.behaviors) - 1)]


def _payload_rows(user: str) -> list:
    fence = user.rfind("```csv")
    if fence >= 0:
        body = user[fence + len("```csv"):]
        body = body[: body.find("```")] if "```" in body else body
        lines = [ln for ln in body.splitlines() if ln.strip()]
    else:
        lines = [ln for ln in user.splitlines() if "," in ln]
    return list(csv.reader(lines))


def _to_csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue().rstrip("\n")


def _is_num(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def _fill_payload(rows):
    """Fill <MISSING> cells: mean for decimal columns, most common token otherwise."""
    if not rows:
        return rows, []
    header, body = rows[0], [list(r) for r in rows[1:]]
    filled = []
    for j in range(len(header)):
        present = [r[j] for r in body if j < len(r) and r[j] != "<MISSING>"]
        # integer-looking columns may be coded categories, so they get the mode
        if present and all(_is_num(t) and "." not in t and "e" not in t.lower() for t in present):
            value = None
        elif present and all(_is_num(t) for t in present):
            value = f"{sum(float(t) for t in present) / len(present):.6g}"
        else:
            value = None
        if value is None and present:
            counts = {}
            for t in present:
                counts[t] = counts.get(t, 0) + 1
            value = max(counts, key=lambda t: counts[t])  # first seen wins ties
        elif value is None:
            value = "0"
        for i, r in enumerate(body):
            if j < len(r) and r[j] == "<MISSING>":
                r[j] = value
                filled.append((i, j))
    return [list(header)] + body, filled


def mock_complete(request: ChatRequest, script: MockScript, index: int = 0) -> ChatResponse:
    """Deterministic response to the ``index``-th request under ``script``."""
    t0 = time.perf_counter()
    kind, arg = script.behavior(index)
    rng = random.Random(f"{script.seed}:{index}")
    if kind == "timeout":
        raise TransportTimeout("mock provider timed out")
    if kind == "rate-limit":
        raise RateLimited("mock provider rate limit (429)")
    if kind == "refused":
        raise ConnectionRefused("mock provider refused the connection")
    if kind == "delay":
        time.sleep(arg)
    rows, filled = _fill_payload(_payload_rows(request.user))
    cells = filled or [(i, j) for i in range(len(rows) - 1) for j in range(len(rows[0]))]
    if kind == "garbage":
        text = arg if arg is not None else "I am sorry but I cannot complete this table."
    elif kind == "drop-column":
        text = _to_csv([r[:-1] for r in rows])
    elif kind == "inject-nan" and cells:
        i, j = cells[rng.randrange(len(cells))]
        rows[i + 1][j] = "NaN"
        text = _to_csv(rows)
    elif kind == "non-numeric" and cells:
        numeric = [(i, j) for i, j in cells if _is_num(rows[i + 1][j])] or cells
        i, j = numeric[rng.randrange(len(numeric))]
        rows[i + 1][j] = "about " + rows[i + 1][j]
        text = _to_csv(rows)
    elif kind == "unknown-category" and cells:
        labelled = [(i, j) for i in range(len(rows) - 1) for j in range(len(rows[0]))
                    if not _is_num(rows[i + 1][j])] or cells
        i, j = labelled[rng.randrange(len(labelled))]
        rows[i + 1][j] = "UNSEEN_LABEL"
        text = _to_csv(rows)
    elif kind == "prose-wrap":
        text = ("Here is the completed table.\n\n" + _to_csv(rows)
                + "\n\nI filled each gap using the column average.")
    else:
        text = _to_csv(rows)
    return ChatResponse(text, None, None, time.perf_counter() - t0)


class MockProvider:
    """Consumes a :class:`MockScript` one behaviour per request, last one repeating."""

    def __init__(self, script: MockScript):
        self.script = script
        self._lock = threading.Lock()
        self.calls = 0
        self.requests: list = []

    def complete(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            index = self.calls
            self.calls += 1
            self.requests.append(request)
        return mock_complete(request, self.script, index)


# --------------------------------------------------------------------- http


def _openai_body(model, req):
    body = {"model": model, "temperature": req.temperature,
            "messages": [{"role": "system", "content": req.system},
                         {"role": "user", "content": req.user}]}
    if req.max_output_tokens:
        body["max_tokens"] = req.max_output_tokens
    return body


def _openai_parse(d):
    usage = d.get("usage") or {}
    return d["choices"][0]["message"]["content"], usage.get("prompt_tokens"), usage.get("completion_tokens")


def _anthropic_body(model, req):
    return {"model": model, "temperature": req.temperature, "system": req.system,
            "max_tokens": req.max_output_tokens or 4096,
            "messages": [{"role": "user", "content": req.user}]}


def _anthropic_parse(d):
    usage = d.get("usage") or {}
    text = "".join(part.get("text", "") for part in d["content"] if part.get("type", "text") == "text")
    return text, usage.get("input_tokens"), usage.get("output_tokens")


def _gemini_body(model, req):
    cfg = {"temperature": req.temperature}
    if req.max_output_tokens:
        cfg["maxOutputTokens"] = req.max_output_tokens
    return {"systemInstruction": {"parts": [{"text": req.system}]},
            "contents": [{"role": "user", "parts": [{"text": req.user}]}],
            "generationConfig": cfg}


def _gemini_parse(d):
    usage = d.get("usageMetadata") or {}
    parts = d["candidates"][0]["content"]["parts"]
    return "".join(p.get("text", "") for p in parts), usage.get("promptTokenCount"), usage.get("candidatesTokenCount")


ADAPTERS = {
    "openai": (_openai_body, _openai_parse, lambda key: {"Authorization": f"Bearer {key}"}),
    "anthropic": (_anthropic_body, _anthropic_parse,
                  lambda key: {"x-api-key": key, "anthropic-version": "2023-06-01"}),
    "gemini": (_gemini_body, _gemini_parse, lambda key: {"x-goog-api-key": key}),
}


@dataclass
class EndpointConfig:
    url: str
    model: str
    adapter: str = "openai"
    api_key_env: Optional[str] = None
    timeout: float = 120.0
    extra_headers: dict = field(default_factory=dict)


class HttpChatClient:
    """Single POST chat-completion call; provider dialects handled by ``ADAPTERS``."""

    def __init__(self, endpoint: EndpointConfig):
        if endpoint.adapter not in ADAPTERS:
            raise ConfigurationError(f"unknown provider adapter {endpoint.adapter!r}")
        if not endpoint.url:
            raise ConfigurationError("endpoint URL is required")
        self.endpoint = endpoint

    def _api_key(self) -> str:
        env = self.endpoint.api_key_env
        if not env:
            return ""
        key = os.environ.get(env)
        if key is None:
            raise ConfigurationError(f"environment variable {env} is not set")
        return key

    def complete(self, request: ChatRequest) -> ChatResponse:
        if request.tools_enabled:
            raise ConfigurationError("tool use must stay disabled")
        build, parse, auth = ADAPTERS[self.endpoint.adapter]
        key = self._api_key()
        headers = {"Content-Type": "application/json", **self.endpoint.extra_headers}
        if key:
            headers.update(auth(key))
        data = json.dumps(build(self.endpoint.model, request)).encode("utf-8")
        req = urllib.request.Request(self.endpoint.url, data=data, headers=headers, method="POST")
        t0 = time.perf_counter()
        try:
            with urllib.request.urlopen(req, timeout=self.endpoint.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            if exc.code == 429:
                raise RateLimited(f"HTTP 429 from {self.endpoint.url}") from exc
            raise TransportError(f"HTTP {exc.code} from {self.endpoint.url}") from exc
        except urllib.error.URLError as exc:
            reason = exc.reason
            if isinstance(reason, (socket.timeout, TimeoutError)):
                raise TransportTimeout(str(reason)) from exc
            if isinstance(reason, ConnectionRefusedError):
                raise ConnectionRefused(str(reason)) from exc
            raise TransportError(str(reason)) from exc
        except (socket.timeout, TimeoutError) as exc:
            raise TransportTimeout(str(exc)) from exc
        except ConnectionRefusedError as exc:
            raise ConnectionRefused(str(exc)) from exc
        except json.JSONDecodeError as exc:
            raise TransportError(f"non-JSON body from {self.endpoint.url}") from exc
        latency = time.perf_counter() - t0
        try:
            text, tin, tout = parse(payload)
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"unexpected response layout: {exc}") from exc
        return ChatResponse(text or "", tin, tout, latency)


def complete_chat(request: ChatRequest, endpoint) -> ChatResponse:
    """Send one request through ``endpoint`` (an EndpointConfig, MockScript or transport object)."""
    if isinstance(endpoint, EndpointConfig):
        return HttpChatClient(endpoint).complete(request)
    if isinstance(endpoint, MockScript):
        return mock_complete(request, endpoint, 0)
    if hasattr(endpoint, "complete"):
        return endpoint.complete(request)
    raise ConfigurationError(f"cannot send a request through {endpoint!r}")
