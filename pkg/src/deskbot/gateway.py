"""HTTP client for remote model backends.

Wire contract: POST {"request_id", "prompt"} as JSON, read {"text": ...}
back. Retries are limited to timeouts and 5xx answers with a fixed 1 s
backoff; 4xx answers and broken connections raise immediately.
"""

from __future__ import annotations

import os
import time
import uuid
from dataclasses import dataclass

import requests

from .errors import (
    BadStatus,
    GatewayConfigError,
    GatewayTimeout,
    MalformedReply,
    TransportError,
)

RETRY_BACKOFF_S = 1.0


@dataclass(frozen=True)
class GatewayConfig:
    """Where and how to reach the remote model service."""

    endpoint: str
    timeout_s: float = 30.0
    max_retries: int = 2
    auth_token_env: str | None = None

    def __post_init__(self):
        if not self.endpoint or not str(self.endpoint).startswith(("http://", "https://")):
            raise GatewayConfigError(f"endpoint must be an http(s) URL, got {self.endpoint!r}")
        if self.timeout_s <= 0:
            raise GatewayConfigError("timeout_s must be positive")
        if self.max_retries < 0:
            raise GatewayConfigError("max_retries must be >= 0")


@dataclass(frozen=True)
class ModelExchange:
    """One completed request/response round trip."""

    request_id: str
    prompt: str
    response: str
    attempts: int
    latency_s: float
    http_status: int


def _auth_headers(cfg: GatewayConfig) -> dict[str, str]:
    if cfg.auth_token_env is None:
        return {}
    token = os.environ.get(cfg.auth_token_env)
    if not token:
        raise GatewayConfigError(f"auth token env var {cfg.auth_token_env!r} is unset")
    return {"Authorization": f"Bearer {token}"}


def send_query(
    cfg: GatewayConfig,
    prompt: str,
    request_id: str | None = None,
    session=None,
    sleep=time.sleep,
) -> ModelExchange:
    """Send one prompt, returning the exchange record.

    Latency covers the whole call including backoff waits. `session` and
    `sleep` exist for tests; any object with requests' `post` shape works.
    """
    headers = {"Content-Type": "application/json"}
    headers.update(_auth_headers(cfg))  # config problems surface before I/O
    rid = request_id or uuid.uuid4().hex
    post = (session or requests).post
    start = time.monotonic()

    attempt = 0
    while True:
        attempt += 1
        try:
            resp = post(
                cfg.endpoint,
                json={"request_id": rid, "prompt": prompt},
                headers=headers,
                timeout=cfg.timeout_s,
            )
        except requests.Timeout as exc:
            if attempt <= cfg.max_retries:
                sleep(RETRY_BACKOFF_S)
                continue
            raise GatewayTimeout(
                f"no reply after {attempt} attempts ({cfg.timeout_s}s each)") from exc
        except requests.ConnectionError as exc:
            raise TransportError(str(exc)) from exc

        status = resp.status_code
        if 500 <= status < 600:
            if attempt <= cfg.max_retries:
                sleep(RETRY_BACKOFF_S)
                continue
            raise BadStatus(f"server error {status} after {attempt} attempts", status_code=status)
        if not 200 <= status < 300:
            raise BadStatus(f"unexpected status {status}", status_code=status)

        try:
            body = resp.json()
        except ValueError as exc:
            raise MalformedReply("response body is not JSON") from exc
        text = body.get("text") if isinstance(body, dict) else None
        if not isinstance(text, str):
            raise MalformedReply("response JSON lacks a string 'text' field")
        return ModelExchange(
            request_id=rid,
            prompt=prompt,
            response=text,
            attempts=attempt,
            latency_s=time.monotonic() - start,
            http_status=status,
        )
