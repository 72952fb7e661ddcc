"""Client for a chat-completions-style inference endpoint.

A one-shot recommendation renders the query document, POSTs it to
``{base_url}/chat/completions`` and screens the completion through the
response classifier. Non-relevant completions are retried with the identical
query (there is no conversational repair; corrections happen offline through
the fine-tuning cycle), so a returned recommendation always validates
against the default search space.
"""
from __future__ import annotations

import json
import os
from collections import Counter
from dataclasses import dataclass
from urllib.parse import urlparse

import httpx

from .prompt import (
    DEFAULT_SYSTEM_PROMPT,
    PromptTemplate,
    RelevanceClass,
    classify_relevance,
    parse_response,
    render_query,
)
from .space import HyperparameterSet, SearchSpace, default_search_space


class EndpointError(RuntimeError):
    """Transport failure, timeout, or an HTTP error status."""


class MalformedResponseError(RuntimeError):
    """The endpoint answered but the completion text could not be located."""


class RecommendationError(RuntimeError):
    """Every attempt produced a non-relevant completion."""

    def __init__(self, histogram: Counter) -> None:
        self.histogram = Counter(histogram)
        counts = {cls.value: n for cls, n in sorted(histogram.items(), key=lambda kv: kv[0].value)}
        super().__init__(f"no relevant completion after {sum(histogram.values())} attempts: {counts}")


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model_name: str
    temperature: float = 0.0
    max_tokens: int = 256
    timeout_seconds: float = 30.0
    max_retries: int = 2
    api_key_env: str = "LLM_API_KEY"

    def __post_init__(self) -> None:
        parts = urlparse(self.base_url)
        if not (parts.scheme and parts.netloc):
            raise ValueError(f"base_url is not a valid URL: {self.base_url!r}")
        if not self.model_name:
            raise ValueError("model_name must be non-empty")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {self.max_tokens}")
        if self.timeout_seconds <= 0:
            raise ValueError(f"timeout_seconds must be positive, got {self.timeout_seconds}")
        if self.max_retries < 0:
            raise ValueError(f"max_retries must be >= 0, got {self.max_retries}")


@dataclass(frozen=True)
class Recommendation:
    params: HyperparameterSet
    raw_response: str
    attempts: int
    endpoint_model: str


@dataclass(frozen=True)
class WireRequest:
    url: str
    headers: dict[str, str]
    body: dict


def build_request(
    query_text: str, config: EndpointConfig, system_prompt: str = DEFAULT_SYSTEM_PROMPT
) -> WireRequest:
    """Pure construction of the wire request; no network activity.

    The bearer token is read from the configured environment variable; when
    it is absent the request is simply unauthenticated.
    """
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(config.api_key_env)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    body = {
        "model": config.model_name,
        "messages": [
            {"role": "system", "content": system_prompt},
            {"role": "user", "content": query_text},
        ],
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
    }
    return WireRequest(url=config.base_url.rstrip("/") + "/chat/completions", headers=headers, body=body)


def parse_completion(body: dict | str | bytes) -> str:
    """Extract ``choices[0].message.content``; extra fields are ignored."""
    if isinstance(body, (str, bytes)):
        try:
            body = json.loads(body)
        except json.JSONDecodeError as exc:
            raise MalformedResponseError(f"response body is not JSON: {exc}") from None
    if not isinstance(body, dict):
        raise MalformedResponseError(f"expected a JSON object, got {type(body).__name__}")
    choices = body.get("choices")
    if not isinstance(choices, list) or not choices:
        raise MalformedResponseError("response has no choices")
    message = choices[0].get("message") if isinstance(choices[0], dict) else None
    if not isinstance(message, dict) or not isinstance(message.get("content"), str):
        raise MalformedResponseError("first choice lacks message.content")
    return message["content"]


def recommend_one_shot(
    model_code: str,
    target_accuracy: float,
    config: EndpointConfig,
    template: PromptTemplate | None = None,
    space: SearchSpace | None = None,
    transport: httpx.BaseTransport | None = None,
) -> Recommendation:
    """Ask the endpoint for one hyperparameter set, retrying on junk.

    ``transport`` is an httpx transport override for tests; production use
    leaves it None. Raises :class:`EndpointError` on transport problems and
    :class:`RecommendationError` (with the per-class attempt histogram) when
    max_retries + 1 attempts all classify as non-relevant.
    """
    template = template if template is not None else PromptTemplate()
    space = space if space is not None else default_search_space()
    query = render_query(model_code, target_accuracy, template)
    request = build_request(query, config, template.system_prompt)

    histogram: Counter = Counter()
    with httpx.Client(timeout=config.timeout_seconds, transport=transport) as client:
        for attempt in range(1, config.max_retries + 2):
            try:
                response = client.post(request.url, headers=request.headers, json=request.body)
            except httpx.HTTPError as exc:
                raise EndpointError(f"request to {request.url} failed: {exc}") from exc
            if response.status_code >= 400:
                raise EndpointError(f"endpoint returned HTTP {response.status_code}: {response.text[:200]}")
            payload = response.json()
            text = parse_completion(payload)
            klass = classify_relevance(text, space)
            if klass is RelevanceClass.RELEVANT:
                parsed = parse_response(text)
                endpoint_model = payload.get("model") if isinstance(payload.get("model"), str) else config.model_name
                return Recommendation(
                    params=parsed.params,
                    raw_response=text,
                    attempts=attempt,
                    endpoint_model=endpoint_model,
                )
            histogram[klass] += 1
    raise RecommendationError(histogram)
