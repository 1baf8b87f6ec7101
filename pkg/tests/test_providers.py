import json
import socket
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from conftest import make_dataset
from imputebench.errors import ConfigurationError, ConnectionRefused, RateLimited, TransportError, TransportTimeout
from imputebench.llm import BatchWindow, build_prompt, parse_and_validate, serialize_batch
from imputebench.providers import (ChatRequest, EndpointConfig, HttpChatClient, MockProvider, MockScript,
                                   complete_chat, mock_complete, parse_behavior)


def _request():
    d = make_dataset(np.array([[1.0, np.nan, 0.0], [2.5, 4.0, 1.0], [np.nan, 6.0, 1.0]]), categorical={2: 2})
    w = BatchWindow(0, 3, 0, 3)
    b = build_prompt("toy", serialize_batch(d, w))
    return d, w, ChatRequest(b.system, b.user)


def _verdict(kind):
    d, w, req = _request()
    schema = [d.schema[c] for c in d.feature_indices]
    return parse_and_validate(mock_complete(req, MockScript((kind,))).text, w, schema)


def test_echo_valid_completes_payload():
    d, w, req = _request()
    parsed = _verdict("echo-valid")
    assert parsed.valid
    obs = ~np.isnan(d.values[:, :3])
    np.testing.assert_array_equal(parsed.cells[obs], d.values[:, :3][obs])
    assert parsed.cells[1, 0] == 2.5 and parsed.cells[0, 1] == 4.0 and parsed.cells[2, 0] == pytest.approx(1.75)


@pytest.mark.parametrize("kind,reason", [
    ("drop-column", "shape-mismatch"),
    ("inject-nan", "missing-marker-present"),
    ("non-numeric", "non-numeric"),
    ("unknown-category", "unknown-category"),
    ("garbage", "unparseable"),
])
def test_invalid_behaviours(kind, reason):
    parsed = _verdict(kind)
    assert not parsed.valid and parsed.reason == reason


def test_prose_wrap_is_valid():
    assert _verdict("prose-wrap").valid


@pytest.mark.parametrize("kind,exc", [("timeout", TransportTimeout), ("rate-limit", RateLimited),
                                      ("refused", ConnectionRefused)])
def test_transport_behaviours(kind, exc):
    _, _, req = _request()
    with pytest.raises(exc):
        mock_complete(req, MockScript((kind,)))


def test_delay_latency():
    _, _, req = _request()
    r = mock_complete(req, MockScript(("delay(0.2)",)))
    assert r.latency >= 0.2
    assert parse_behavior("delay:0.5") == ("delay", 0.5)


def test_script_determinism_and_repeat():
    _, _, req = _request()
    script = MockScript.from_text("# comment\ninject-nan\nvalid\n", seed=3)
    a = [mock_complete(req, script, i).text for i in range(4)]
    b = [mock_complete(req, script, i).text for i in range(4)]
    assert a == b
    assert a[2] == a[3]  # last behaviour repeats
    p = MockProvider(script)
    assert [p.complete(req).text for _ in range(4)] == a
    with pytest.raises(ValueError):
        parse_behavior("explode")


def test_complete_chat_dispatch():
    _, _, req = _request()
    assert complete_chat(req, MockScript(("valid",))).text
    with pytest.raises(ConfigurationError):
        complete_chat(req, object())


class _Handler(BaseHTTPRequestHandler):
    mode = "ok"
    seen = []

    def log_message(self, *args):
        pass

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).seen.append((dict(self.headers), body))
        if self.mode == "429":
            self.send_response(429)
            self.end_headers()
            return
        if self.mode == "slow":
            import time
            time.sleep(0.5)
        out = {"choices": [{"message": {"content": "a,b\n1,2"}}],
               "usage": {"prompt_tokens": 11, "completion_tokens": 5}}
        data = json.dumps(out).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


@pytest.fixture
def server():
    srv = HTTPServer(("127.0.0.1", 0), _Handler)
    t = threading.Thread(target=srv.serve_forever, daemon=True)
    t.start()
    yield srv
    srv.shutdown()
    srv.server_close()


def _endpoint(srv, **kw):
    return EndpointConfig(f"http://127.0.0.1:{srv.server_address[1]}/v1/chat", "test-model", **kw)


def test_http_success(server, monkeypatch):
    _Handler.mode, _Handler.seen = "ok", []
    monkeypatch.setenv("TEST_KEY", "secret")
    r = HttpChatClient(_endpoint(server, api_key_env="TEST_KEY")).complete(ChatRequest("sys", "user"))
    assert r.text == "a,b\n1,2" and r.input_tokens == 11 and r.output_tokens == 5
    headers, body = _Handler.seen[-1]
    assert headers["Authorization"] == "Bearer secret"
    assert body["temperature"] == 0.1 and body["model"] == "test-model"
    assert "tools" not in body


def test_http_rate_limit(server):
    _Handler.mode = "429"
    with pytest.raises(RateLimited):
        HttpChatClient(_endpoint(server)).complete(ChatRequest("s", "u"))


def test_http_timeout(server):
    _Handler.mode = "slow"
    with pytest.raises(TransportTimeout):
        HttpChatClient(_endpoint(server, timeout=0.1)).complete(ChatRequest("s", "u"))


def test_http_refused():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    with pytest.raises(ConnectionRefused):
        HttpChatClient(EndpointConfig(f"http://127.0.0.1:{port}/x", "m", timeout=2)).complete(ChatRequest("s", "u"))


def test_http_config_errors(monkeypatch):
    monkeypatch.delenv("NOPE_KEY", raising=False)
    with pytest.raises(ConfigurationError):
        HttpChatClient(EndpointConfig("http://x", "m", adapter="nope"))
    with pytest.raises(ConfigurationError):
        HttpChatClient(EndpointConfig("http://x", "m", api_key_env="NOPE_KEY")).complete(ChatRequest("s", "u"))
    with pytest.raises(ConfigurationError):
        HttpChatClient(EndpointConfig("http://x", "m")).complete(ChatRequest("s", "u", tools_enabled=True))
    assert issubclass(RateLimited, TransportError)
