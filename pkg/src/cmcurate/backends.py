"""Clients for external model backends (LID classifiers, scorers, translators).

All backends share one wire contract: the request is a JSON object
``{"id", "text", "prompt_template", ...}`` and the response is a single JSON
object. Classifiers answer with a ``label`` field, scorers with ``score``,
translators with ``translation``.

Transports:

* ``http://`` / ``https://`` endpoints get a POST with a JSON body.
* anything else is run as a subprocess command; the request goes to stdin
  and the response is read from stdout.

API keys are read from the environment variable named by ``api_key_env`` at
call time and sent as a bearer token; they never appear in configs or
manifests.
"""

from __future__ import annotations

import json
import logging
import os
import shlex
import subprocess
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Callable

from .errors import BackendError, ConfigError

logger = logging.getLogger(__name__)

__all__ = [
    "ClassifierBackend",
    "TokenBucket",
    "JsonBackend",
    "MalformedResponse",
    "http_transport",
    "subprocess_transport",
]

Transport = Callable[[dict, float], object]


class MalformedResponse(BackendError):
    """The backend answered, but not with the expected JSON shape."""


@dataclass(frozen=True)
class ClassifierBackend:
    """Configuration of one external backend."""

    name: str
    endpoint: str
    prompt_template: str = "{text}"
    timeout_ms: int = 30_000
    max_retries: int = 2
    rate_limit: float | None = None  # requests per second
    api_key_env: str | None = None
    backoff_s: float = 0.5

    def __post_init__(self):
        if not self.name:
            raise ConfigError("backend name must be non-empty")
        if self.timeout_ms <= 0:
            raise ConfigError(f"backend {self.name}: timeout_ms must be > 0")
        if self.max_retries < 0:
            raise ConfigError(f"backend {self.name}: max_retries must be >= 0")
        if self.rate_limit is not None and self.rate_limit <= 0:
            raise ConfigError(f"backend {self.name}: rate_limit must be > 0")


class TokenBucket:
    """Thread-safe token bucket; ``acquire`` blocks until a token is free."""

    def __init__(self, rate: float, capacity: float | None = None, clock=time.monotonic, sleep=time.sleep):
        self.rate = rate
        self.capacity = capacity if capacity is not None else max(1.0, rate)
        self._tokens = self.capacity
        self._clock = clock
        self._sleep = sleep
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self):
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1:
                    self._tokens -= 1
                    return
                wait = (1 - self._tokens) / self.rate
            self._sleep(wait)


def http_transport(endpoint: str, api_key_env: str | None = None) -> Transport:
    def send(payload: dict, timeout: float):
        headers = {"Content-Type": "application/json"}
        if api_key_env:
            key = os.environ.get(api_key_env)
            if not key:
                raise BackendError(f"environment variable {api_key_env} is not set")
            headers["Authorization"] = f"Bearer {key}"
        req = urllib.request.Request(
            endpoint, data=json.dumps(payload).encode("utf-8"), headers=headers, method="POST"
        )
        try:
            with urllib.request.urlopen(req, timeout=timeout) as resp:
                body = resp.read().decode("utf-8")
        except (urllib.error.URLError, TimeoutError, OSError) as e:
            raise BackendError(f"{endpoint}: {e}") from e
        try:
            return json.loads(body)
        except json.JSONDecodeError:
            raise MalformedResponse(f"{endpoint}: response is not JSON: {body[:200]!r}") from None

    return send


def subprocess_transport(command: str, api_key_env: str | None = None) -> Transport:
    argv = shlex.split(command)

    def send(payload: dict, timeout: float):
        if api_key_env and api_key_env not in os.environ:
            raise BackendError(f"environment variable {api_key_env} is not set")
        try:
            proc = subprocess.run(
                argv,
                input=json.dumps(payload, ensure_ascii=False),
                capture_output=True,
                text=True,
                timeout=timeout,
            )
        except subprocess.TimeoutExpired as e:
            raise BackendError(f"{argv[0]}: timed out after {timeout}s") from e
        except OSError as e:
            raise BackendError(f"{argv[0]}: {e}") from e
        if proc.returncode != 0:
            raise BackendError(f"{argv[0]}: exit {proc.returncode}: {proc.stderr.strip()[:200]}")
        out = proc.stdout.strip()
        try:
            return json.loads(out)
        except json.JSONDecodeError:
            raise MalformedResponse(f"{argv[0]}: response is not JSON: {out[:200]!r}") from None

    return send


class JsonBackend:
    """A configured backend with retries and rate limiting.

    ``transport`` overrides the endpoint-derived transport; it is called as
    ``transport(payload, timeout_seconds)`` and returns the decoded response.
    """

    def __init__(self, config: ClassifierBackend, transport: Transport | None = None):
        self.config = config
        if transport is None:
            if config.endpoint.startswith(("http://", "https://")):
                transport = http_transport(config.endpoint, config.api_key_env)
            else:
                transport = subprocess_transport(config.endpoint, config.api_key_env)
        self.transport = transport
        self.bucket = TokenBucket(config.rate_limit) if config.rate_limit else None

    @property
    def name(self):
        return self.config.name

    def request(self, text: str, record_id: str = "", **extra) -> dict:
        """Send one request; retry transport failures, never malformed replies."""
        payload = {"id": record_id, "text": text, "prompt_template": self.config.prompt_template}
        payload.update(extra)
        timeout = self.config.timeout_ms / 1000
        last = None
        for attempt in range(self.config.max_retries + 1):
            if self.bucket is not None:
                self.bucket.acquire()
            try:
                resp = self.transport(payload, timeout)
            except MalformedResponse:
                raise
            except (BackendError, TimeoutError, OSError) as e:
                last = e
                logger.warning(
                    "backend %s failed on %s (attempt %d/%d): %s",
                    self.name, record_id, attempt + 1, self.config.max_retries + 1, e,
                )
                if attempt < self.config.max_retries and self.config.backoff_s:
                    time.sleep(self.config.backoff_s * 2**attempt)
                continue
            if not isinstance(resp, dict):
                raise MalformedResponse(f"{self.name}: expected a JSON object, got {resp!r:.200}")
            return resp
        raise BackendError(f"{self.name}: giving up on {record_id} after retries: {last}")
