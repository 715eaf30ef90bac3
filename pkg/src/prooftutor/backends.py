"""Agent backends: deterministic scripted agents and remote chat endpoints.

Remote endpoints speak the common chat-completion wire shape (messages
array, temperature). Credentials come from the environment only; network
failures retry with exponential backoff, which is distinct from the
schema-level re-prompting handled by the pipeline.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass
from typing import Callable

import httpx

__all__ = [
    "AgentBackend",
    "ScriptedBackend",
    "RemoteChatBackend",
    "EndpointConfig",
    "BackendUnavailable",
    "AuthFailure",
    "remote_chat_call",
]


class BackendUnavailable(RuntimeError):
    """Endpoint unreachable after network retries."""


class AuthFailure(RuntimeError):
    """Missing or rejected credentials."""


class AgentBackend:
    """One agent seat: something that completes a chat prompt to text."""

    identity: str
    kind: str

    def complete(self, messages: list[dict]) -> str:
        raise NotImplementedError


class ScriptedBackend(AgentBackend):
    """Offline backend driven by a deterministic function of the messages."""

    kind = "scripted"

    def __init__(self, identity: str, script: Callable[[list[dict]], str]):
        self.identity = identity
        self._script = script

    def complete(self, messages: list[dict]) -> str:
        return self._script(messages)


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model: str
    credential_env: str | None = None
    timeout_s: float = 60.0
    network_retries: int = 3
    backoff_base_s: float = 0.5


def remote_chat_call(
    endpoint: EndpointConfig,
    messages: list[dict],
    temperature: float = 0.0,
    transport: httpx.BaseTransport | None = None,
) -> str:
    """One chat-completion round trip; returns the completion text.

    Retries timeouts, connection errors, and 5xx responses with
    exponential backoff. 401/403 raise AuthFailure immediately.
    """
    headers = {"Content-Type": "application/json"}
    if endpoint.credential_env is not None:
        token = os.environ.get(endpoint.credential_env)
        if not token:
            raise AuthFailure(f"environment variable {endpoint.credential_env} is not set")
        headers["Authorization"] = f"Bearer {token}"
    body = {"model": endpoint.model, "messages": messages, "temperature": temperature}
    url = endpoint.base_url.rstrip("/") + "/chat/completions"
    last_error: Exception | None = None
    with httpx.Client(transport=transport, timeout=endpoint.timeout_s) as client:
        for attempt in range(endpoint.network_retries + 1):
            if attempt:
                time.sleep(endpoint.backoff_base_s * 2 ** (attempt - 1))
            try:
                response = client.post(url, json=body, headers=headers)
            except (httpx.TimeoutException, httpx.TransportError) as exc:
                last_error = exc
                continue
            if response.status_code in (401, 403):
                raise AuthFailure(f"endpoint rejected credentials ({response.status_code})")
            if response.status_code >= 500:
                last_error = RuntimeError(f"server error {response.status_code}")
                continue
            response.raise_for_status()
            data = response.json()
            return data["choices"][0]["message"]["content"]
    raise BackendUnavailable(f"{url} unavailable after {endpoint.network_retries + 1} attempts: {last_error}")


class RemoteChatBackend(AgentBackend):
    """Chat-completion endpoint as an agent seat. Temperature is pinned to 0."""

    kind = "remote-chat"

    def __init__(
        self,
        endpoint: EndpointConfig,
        temperature: float = 0.0,
        transport: httpx.BaseTransport | None = None,
    ):
        if endpoint.credential_env is not None and not os.environ.get(endpoint.credential_env):
            raise AuthFailure(f"environment variable {endpoint.credential_env} is not set")
        self.identity = endpoint.model
        self.endpoint = endpoint
        self.temperature = temperature
        self._transport = transport

    def complete(self, messages: list[dict]) -> str:
        return remote_chat_call(
            self.endpoint, messages, temperature=self.temperature, transport=self._transport
        )
