"""Chat-completion gateways: a real HTTP client and a replayable stub.

Both expose complete(request) -> str. The HTTP gateway talks to any
OpenAI-compatible /chat/completions endpoint with bearer auth read from an
environment variable (never from config files). The stub replays recorded
responses from a line-delimited JSON fixture so pipelines run offline and
deterministically.

Fixture lines are either
    {"key": "<request key>", "response": "..."}   matched by request content
    {"seq": <int>, "response": "..."}             consumed in order as fallback
where the request key is sha256 over the message list (roles and contents
only), so fixtures survive changes to model name or sampling settings.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass


class GatewayError(RuntimeError):
    """The gateway could not produce a response."""


class TransportError(GatewayError):
    """HTTP-level failure after retries were exhausted."""


class FixtureError(GatewayError):
    """The stub fixture has no response for a request."""


@dataclass
class ChatRequest:
    model: str
    messages: list[dict]
    temperature: float = 0.0
    max_tokens: int = 512
    media: list[str] | None = None


@dataclass
class GatewayConfig:
    """Connection settings; api_key_source names the env var holding the key."""

    endpoint_url: str = ""
    model: str = "llama-3.3-70b-instruct"
    api_key_source: str = "VCF_API_KEY"
    retries: int = 3
    backoff: float = 0.5
    timeout: float = 60.0
    stub_fixture: str | None = None


def request_key(messages: list[dict]) -> str:
    """Stable digest of a message list, independent of model/sampling settings."""
    joined = "\x1e".join(f"{m.get('role', '')}\x1f{m.get('content', '')}" for m in messages)
    return hashlib.sha256(joined.encode("utf-8")).hexdigest()


def user_request_key(prompt_text: str) -> str:
    """Key for the common single-user-turn request shape."""
    return request_key([{"role": "user", "content": prompt_text}])


class StubGateway:
    """Replays fixture responses; thread-safe; never touches the network."""

    def __init__(self, fixture_path: str, model: str = "stub"):
        self.model = model
        self._lock = threading.Lock()
        self._by_key: dict[str, list[str]] = {}
        self._sequential: list[str] = []
        with open(fixture_path, "r", encoding="utf-8") as stream:
            for line_no, line in enumerate(stream, start=1):
                if not line.strip():
                    continue
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise FixtureError(f"fixture line {line_no}: invalid JSON: {exc.msg}") from None
                if "response" not in entry:
                    raise FixtureError(f"fixture line {line_no}: missing response")
                if "key" in entry:
                    self._by_key.setdefault(entry["key"], []).append(entry["response"])
                elif "seq" in entry:
                    self._sequential.append((int(entry["seq"]), entry["response"]))
                else:
                    raise FixtureError(f"fixture line {line_no}: needs key or seq")
        self._sequential = [resp for _, resp in sorted(self._sequential, key=lambda t: t[0])]
        self._seq_cursor = 0

    def complete(self, request: ChatRequest) -> str:
        key = request_key(request.messages)
        with self._lock:
            queue = self._by_key.get(key)
            if queue:
                # Multi-entry keys step through their responses; the final
                # entry replays forever so identical re-asks stay answerable.
                if len(queue) > 1:
                    return queue.pop(0)
                return queue[0]
            if self._seq_cursor < len(self._sequential):
                response = self._sequential[self._seq_cursor]
                self._seq_cursor += 1
                return response
        head = ""
        if request.messages:
            head = str(request.messages[-1].get("content", ""))[:120]
        raise FixtureError(f"no fixture response for key {key} (prompt head: {head!r})")


class HttpGateway:
    """OpenAI-compatible chat client with exponential-backoff retries.

    post is injectable for tests; it defaults to requests.post. Transient
    failures (connection errors, 5xx, 429) are retried config.retries times
    with backoff * 2**attempt sleeps; other 4xx responses fail immediately.
    """

    def __init__(self, config: GatewayConfig, post=None):
        if not config.endpoint_url:
            raise GatewayError("endpoint_url not configured")
        self.config = config
        self.model = config.model
        if post is None:
            import requests

            post = requests.post
        self._post = post

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_source, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _payload(self, request: ChatRequest) -> dict:
        messages = request.messages
        if request.media:
            # Attach media refs to the last user turn as multi-part content;
            # the refs are forwarded opaquely, never opened locally.
            messages = [dict(m) for m in messages]
            for message in reversed(messages):
                if message.get("role") == "user":
                    parts = [{"type": "video_url", "video_url": {"url": ref}} for ref in request.media]
                    parts.append({"type": "text", "text": message["content"]})
                    message["content"] = parts
                    break
        return {
            "model": request.model or self.config.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }

    def complete(self, request: ChatRequest) -> str:
        import requests

        payload = self._payload(request)
        last_error = "no attempts made"
        for attempt in range(self.config.retries + 1):
            if attempt:
                time.sleep(self.config.backoff * 2 ** (attempt - 1))
            try:
                response = self._post(
                    self.config.endpoint_url,
                    json=payload,
                    headers=self._headers(),
                    timeout=self.config.timeout,
                )
            except requests.RequestException as exc:
                last_error = f"transport: {exc}"
                continue
            status = getattr(response, "status_code", 0)
            if status == 429 or 500 <= status < 600:
                last_error = f"HTTP {status}"
                continue
            if status != 200:
                raise TransportError(f"HTTP {status}: {getattr(response, 'text', '')[:200]}")
            try:
                body = response.json()
                content = body["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise TransportError(f"malformed response body: {exc}") from None
            if not isinstance(content, str):
                raise TransportError("response content is not text")
            return content
        raise TransportError(f"gave up after {self.config.retries + 1} attempts ({last_error})")


def gateway_from_config(config: GatewayConfig, post=None):
    """Stub when a fixture is configured, HTTP otherwise; never both."""
    if config.stub_fixture and config.endpoint_url:
        raise GatewayError("stub_fixture and endpoint_url are mutually exclusive")
    if config.stub_fixture:
        return StubGateway(config.stub_fixture, model=config.model)
    return HttpGateway(config, post=post)
