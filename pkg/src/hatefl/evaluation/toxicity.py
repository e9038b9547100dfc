"""HTTP client for toxicity-scoring APIs.

Two wire profiles are supported:

``simple``
    ``POST {"text": ...}`` -> ``{"score": <float>}``, bearer-token auth.
``perspective``
    The Perspective ``comments:analyze`` shape; the token goes in the ``key``
    query parameter and the score is read from
    ``attributeScores.TOXICITY.summaryScore.value``.
"""

from __future__ import annotations

import logging
import math
import os
import time
import warnings
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import httpx

from hatefl.errors import AuthError, ConfigError, MalformedResponse, NetworkError, ToxicityAPIError
from hatefl.evaluation.thresholds import DEFAULT_THRESHOLDS

log = logging.getLogger(__name__)

PROFILES = ("simple", "perspective")


class ScoreClampedWarning(UserWarning):
    """The API returned a score outside [0, 1]; it was clamped."""


@dataclass(frozen=True)
class ToxicityConfig:
    endpoint: str
    token_env: str | None = None
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    timeout: float = 10.0
    retries: int = 2
    backoff: float = 0.5
    profile: str = "simple"
    max_in_flight: int = 4
    languages: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        if list(self.thresholds) != sorted(self.thresholds):
            raise ConfigError(f"thresholds must be sorted ascending, got {self.thresholds}")
        if any(not 0.0 <= t <= 1.0 for t in self.thresholds):
            raise ConfigError(f"thresholds must lie in [0, 1], got {self.thresholds}")
        if self.profile not in PROFILES:
            raise ConfigError(f"unknown toxicity profile {self.profile!r}; expected one of {PROFILES}")
        if self.retries < 0 or self.max_in_flight < 1:
            raise ConfigError("retries must be >= 0 and max_in_flight >= 1")

    def token(self) -> str | None:
        if self.token_env is None:
            return None
        value = os.environ.get(self.token_env)
        if not value:
            raise AuthError(f"environment variable {self.token_env} is not set")
        return value


class ToxicityClient:
    def __init__(self, cfg: ToxicityConfig, transport: httpx.BaseTransport | None = None) -> None:
        self.cfg = cfg
        self._token = cfg.token()
        headers = {"Content-Type": "application/json"}
        if self._token and cfg.profile == "simple":
            headers["Authorization"] = f"Bearer {self._token}"
        self._http = httpx.Client(timeout=cfg.timeout, headers=headers, transport=transport)

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> "ToxicityClient":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    def _request(self, text: str) -> httpx.Request:
        if self.cfg.profile == "perspective":
            body: dict = {"comment": {"text": text}, "requestedAttributes": {"TOXICITY": {}}}
            if self.cfg.languages:
                body["languages"] = list(self.cfg.languages)
            params = {"key": self._token} if self._token else None
            return self._http.build_request("POST", self.cfg.endpoint, json=body, params=params)
        return self._http.build_request("POST", self.cfg.endpoint, json={"text": text})

    def _parse(self, response: httpx.Response) -> float:
        try:
            payload = response.json()
            if self.cfg.profile == "perspective":
                raw = payload["attributeScores"]["TOXICITY"]["summaryScore"]["value"]
            else:
                raw = payload["score"]
            score = float(raw)
        except (ValueError, KeyError, TypeError) as exc:
            raise MalformedResponse(f"cannot read score from response: {exc!r}") from exc
        if isinstance(raw, bool) or not math.isfinite(score):
            raise MalformedResponse(f"score is not a finite number: {raw!r}")
        if not 0.0 <= score <= 1.0:
            clamped = min(1.0, max(0.0, score))
            warnings.warn(f"toxicity score {score} clamped to {clamped}", ScoreClampedWarning, stacklevel=3)
            score = clamped
        return score

    def score(self, text: str) -> float:
        attempts = self.cfg.retries + 1
        last: Exception | None = None
        for attempt in range(attempts):
            if attempt:
                time.sleep(self.cfg.backoff * 2 ** (attempt - 1))
            try:
                response = self._http.send(self._request(text))
            except httpx.TransportError as exc:
                last = exc
                log.debug("toxicity request failed (attempt %d/%d): %s", attempt + 1, attempts, exc)
                continue
            if response.status_code in (401, 403):
                raise AuthError(f"API rejected credentials (HTTP {response.status_code})")
            if response.status_code == 429 or response.status_code >= 500:
                last = ToxicityAPIError(f"HTTP {response.status_code}")
                log.debug("toxicity API returned %d (attempt %d/%d)", response.status_code, attempt + 1, attempts)
                continue
            if response.status_code >= 400:
                raise ToxicityAPIError(f"HTTP {response.status_code}: {response.text[:200]}")
            return self._parse(response)
        raise NetworkError(f"giving up after {attempts} attempts: {last}")

    def score_many(self, texts: Sequence[str]) -> list[float]:
        """Scores aligned with ``texts`` by index, with bounded concurrency."""
        if self.cfg.max_in_flight == 1 or len(texts) <= 1:
            return [self.score(t) for t in texts]
        with ThreadPoolExecutor(max_workers=self.cfg.max_in_flight) as pool:
            return list(pool.map(self.score, texts))


def score_toxicity(cfg: ToxicityConfig, text: str, transport: httpx.BaseTransport | None = None) -> float:
    with ToxicityClient(cfg, transport=transport) as client:
        return client.score(text)
