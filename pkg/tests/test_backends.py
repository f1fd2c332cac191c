import json
import sys

import pytest

from cmcurate.backends import ClassifierBackend, JsonBackend, MalformedResponse, TokenBucket
from cmcurate.errors import BackendError, ConfigError


def cfg(**kw):
    base = dict(name="b", endpoint="unused", max_retries=2, backoff_s=0)
    base.update(kw)
    return ClassifierBackend(**base)


class Flaky:
    def __init__(self, failures, reply=None):
        self.failures = failures
        self.calls = []
        self.reply = reply if reply is not None else {"label": "code_mixed"}

    def __call__(self, payload, timeout):
        self.calls.append((payload, timeout))
        if len(self.calls) <= self.failures:
            raise BackendError("transient")
        return self.reply


def test_config_validation():
    for bad in (dict(name=""), dict(timeout_ms=0), dict(max_retries=-1), dict(rate_limit=0)):
        with pytest.raises(ConfigError):
            cfg(**bad)


def test_retries_then_succeeds():
    t = Flaky(failures=2)
    b = JsonBackend(cfg(timeout_ms=1500), transport=t)
    assert b.request("xin chào", "r1", extra_field=1) == {"label": "code_mixed"}
    assert len(t.calls) == 3
    payload, timeout = t.calls[0]
    assert payload == {"id": "r1", "text": "xin chào", "prompt_template": "{text}", "extra_field": 1}
    assert timeout == 1.5


def test_gives_up_after_retries():
    t = Flaky(failures=10)
    with pytest.raises(BackendError, match="giving up"):
        JsonBackend(cfg(), transport=t).request("x")
    assert len(t.calls) == 3


def test_malformed_is_not_retried():
    def bad(payload, timeout):
        bad.n += 1
        raise MalformedResponse("not json")

    bad.n = 0
    with pytest.raises(MalformedResponse):
        JsonBackend(cfg(), transport=bad).request("x")
    assert bad.n == 1
    with pytest.raises(MalformedResponse):
        JsonBackend(cfg(), transport=Flaky(0, reply=["a list"])).request("x")


def test_token_bucket_waits_with_fake_clock():
    now = [0.0]
    sleeps = []

    def sleep(s):
        sleeps.append(s)
        now[0] += s

    bucket = TokenBucket(rate=2.0, capacity=1, clock=lambda: now[0], sleep=sleep)
    for _ in range(3):
        bucket.acquire()
    assert sleeps == [0.5, 0.5]


def test_subprocess_transport(tmp_path):
    script = tmp_path / "echo_backend.py"
    script.write_text(
        "import json, sys\n"
        "req = json.load(sys.stdin)\n"
        "print(json.dumps({'label': 'monolingual', 'echo': req['text']}))\n",
        encoding="utf-8",
    )
    b = JsonBackend(cfg(endpoint=f"{sys.executable} {script}"))
    assert b.request("chào") == {"label": "monolingual", "echo": "chào"}


def test_subprocess_transport_failures(tmp_path):
    script = tmp_path / "bad.py"
    script.write_text("print('not json')\n", encoding="utf-8")
    with pytest.raises(MalformedResponse):
        JsonBackend(cfg(endpoint=f"{sys.executable} {script}")).request("x")
    crash = tmp_path / "crash.py"
    crash.write_text("import sys; sys.exit(3)\n", encoding="utf-8")
    with pytest.raises(BackendError):
        JsonBackend(cfg(endpoint=f"{sys.executable} {crash}", max_retries=0)).request("x")


def test_missing_api_key_env(monkeypatch):
    monkeypatch.delenv("CMCURATE_TEST_KEY", raising=False)
    b = JsonBackend(cfg(endpoint="http://127.0.0.1:9/x", api_key_env="CMCURATE_TEST_KEY", max_retries=0))
    with pytest.raises(BackendError, match="CMCURATE_TEST_KEY"):
        b.request("x")


def test_http_transport_sends_bearer_key(monkeypatch):
    import urllib.request

    seen = {}

    class Resp:
        def __enter__(self):
            return self

        def __exit__(self, *a):
            return False

        def read(self):
            return json.dumps({"score": 0.7}).encode()

    def fake_urlopen(req, timeout):
        seen["auth"] = req.get_header("Authorization")
        seen["body"] = json.loads(req.data)
        return Resp()

    monkeypatch.setenv("CMCURATE_TEST_KEY", "sekrit")
    monkeypatch.setattr(urllib.request, "urlopen", fake_urlopen)
    b = JsonBackend(cfg(endpoint="https://qe.example.org", api_key_env="CMCURATE_TEST_KEY"))
    assert b.request("x", "r9") == {"score": 0.7}
    assert seen["auth"] == "Bearer sekrit" and seen["body"]["id"] == "r9"
