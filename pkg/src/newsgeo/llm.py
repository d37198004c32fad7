"""Prompt construction, providers and answer parsing.

Providers expose a single ``complete(request) -> str`` method and signal
failure by raising :class:`ProviderError`. The answer grammar is one line::

    LAT=<decimal> LON=<decimal> COUNTRY=<AA|ZZ> ID=<digits|NONE>
"""

from __future__ import annotations

import itertools
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Mapping, Protocol, Sequence

import requests

from newsgeo.gazetteer import Gazetteer, GazetteerEntry
from newsgeo.index import Candidate
from newsgeo.metrics import GeoPoint

log = logging.getLogger(__name__)

API_KEY_ENV = "GEOCODER_API_KEY"
UNKNOWN_COUNTRY = "ZZ"

PARSED = "parsed"
PARSE_FAILED = "parse_failed"
PROVIDER_FAILED = "provider_failed"

GEOCODE_TASK = "geocode"
COUNTRY_TASK = "country"

CONTEXT_HEADER = "### Candidate locations"
MENTION_HEADER = "### Location reference"
ARTICLE_HEADER = "### News article"

GEOCODE_INSTRUCTIONS = (
    "You resolve a location reference in a news article to geographic coordinates.\n"
    "Candidate locations from a gazetteer may be listed below; pick the one the "
    "article refers to, or use your own knowledge if none fits.\n"
    "Answer with exactly one line in this format and nothing else:\n"
    "LAT=<decimal> LON=<decimal> COUNTRY=<ISO 3166-1 alpha-2 code, or ZZ> "
    "ID=<candidate id, or NONE>"
)

COUNTRY_INSTRUCTIONS = (
    "Identify the country that contains the location reference below, as used in "
    "the news article.\n"
    "Answer with only the ISO 3166-1 alpha-2 country code, or UNKNOWN if the "
    "location is not inside a single country."
)

_DECIMAL = r"[+-]?\d+(?:\.\d+)?"
_ANSWER_RE = re.compile(
    rf"^\s*LAT=({_DECIMAL})\s+LON=({_DECIMAL})\s+COUNTRY=([A-Za-z]{{2}})\s+ID=(\d+|NONE)\s*$",
    re.MULTILINE,
)
_CONTEXT_LINE_RE = re.compile(r"^\[(\d+)\] ", re.MULTILINE)


class ProviderError(RuntimeError):
    """The provider could not produce a completion."""


@dataclass(frozen=True)
class ProviderRequest:
    prompt: str
    max_output_tokens: int = 64
    temperature: float = 0.0
    timeout: float = 30.0
    task: str = GEOCODE_TASK
    # pipeline-assigned request number; lets fault injection stay order-independent
    seq: int | None = None

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


class Provider(Protocol):
    def complete(self, request: ProviderRequest) -> str: ...


@dataclass
class GeoPrediction:
    status: str
    raw_response: str = ""
    point: GeoPoint | None = None
    country_code: str | None = None
    chosen_candidate_id: int | None = None
    diagnostic: str | None = None

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "latitude": None if self.point is None else self.point.latitude,
            "longitude": None if self.point is None else self.point.longitude,
            "country_code": self.country_code,
            "chosen_candidate_id": self.chosen_candidate_id,
            "raw_response": self.raw_response,
            "diagnostic": self.diagnostic,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "GeoPrediction":
        point = None
        if data.get("latitude") is not None:
            point = GeoPoint(data["latitude"], data["longitude"])
        return cls(
            status=data["status"],
            raw_response=data.get("raw_response", ""),
            point=point,
            country_code=data.get("country_code"),
            chosen_candidate_id=data.get("chosen_candidate_id"),
            diagnostic=data.get("diagnostic"),
        )


@dataclass(frozen=True)
class PromptFlags:
    feature_types: bool = True
    state_context: bool = True


@dataclass(frozen=True)
class PromptBundle:
    context_block: str
    mention_block: str
    article_block: str

    def render(self) -> str:
        parts = [GEOCODE_INSTRUCTIONS]
        if self.context_block:
            parts.append(f"{CONTEXT_HEADER}\n{self.context_block}")
        parts.append(f"{MENTION_HEADER}\n{self.mention_block}")
        parts.append(f"{ARTICLE_HEADER}\n{self.article_block}")
        return "\n\n".join(parts) + "\n"


def _num(value: float) -> str:
    """Plain positional decimal that parses back to the same float."""
    text = repr(float(value))
    if "e" in text or "E" in text:
        text = format(Decimal(text), "f")
    if text.endswith(".0"):
        text = text[:-2]
    return text


def candidate_context_sentence(candidate: Candidate | GazetteerEntry, flags: PromptFlags) -> str:
    entry = candidate.entry if isinstance(candidate, Candidate) else candidate
    head = entry.name
    if flags.feature_types and entry.feature_code:
        head += f" (feature type {entry.feature_code})"
    where = entry.country_code or "an unknown country"
    if flags.state_context and entry.admin1:
        where = f"{entry.admin1}, {where}"
    return (
        f"{head} is located at latitude {_num(entry.latitude)}, "
        f"longitude {_num(entry.longitude)} in {where}."
    )


def build_geocoding_prompt(
    candidates: Sequence[Candidate],
    mention: str,
    article: str,
    flags: PromptFlags,
) -> PromptBundle:
    if mention not in article:
        log.warning("mention %r does not occur in the article text", mention)
    ordered = sorted(candidates, key=lambda c: c.rank)
    context = "\n".join(
        f"[{c.entry.id}] {candidate_context_sentence(c, flags)}" for c in ordered
    )
    return PromptBundle(context_block=context, mention_block=mention, article_block=article)


def build_country_prompt(article: str, mention: str) -> str:
    return (
        f"{COUNTRY_INSTRUCTIONS}\n\n{MENTION_HEADER}\n{mention}\n\n"
        f"{ARTICLE_HEADER}\n{article}\n"
    )


def parse_country_response(raw: str) -> str | None:
    text = raw.strip().strip(".").strip()
    m = re.fullmatch(r"(?:COUNTRY\s*[=:]\s*)?([A-Za-z]{2})", text, flags=re.IGNORECASE)
    if not m:
        return None
    code = m.group(1).upper()
    return None if code == UNKNOWN_COUNTRY else code


def infer_country(article: str, mention: str, provider: Provider, timeout: float = 30.0) -> str | None:
    """Ask the provider for the mention's ISO-2 country; None on any failure."""
    request = ProviderRequest(
        prompt=build_country_prompt(article, mention),
        max_output_tokens=8,
        timeout=timeout,
        task=COUNTRY_TASK,
    )
    try:
        raw = provider.complete(request)
    except ProviderError as exc:
        log.warning("country inference failed for %r: %s", mention, exc)
        return None
    return parse_country_response(raw)


def format_geocode_answer(prediction: GeoPrediction) -> str:
    if prediction.point is None:
        raise ValueError("only predictions with a point can be formatted")
    country = prediction.country_code or UNKNOWN_COUNTRY
    ident = "NONE" if prediction.chosen_candidate_id is None else str(prediction.chosen_candidate_id)
    return (
        f"LAT={_num(prediction.point.latitude)} LON={_num(prediction.point.longitude)} "
        f"COUNTRY={country} ID={ident}"
    )


def parse_geocode_response(raw_text: str) -> GeoPrediction:
    """First well-formed answer line wins; anything else is ``parse_failed``."""
    m = _ANSWER_RE.search(raw_text or "")
    if m is None:
        return GeoPrediction(PARSE_FAILED, raw_text, diagnostic="no answer line")
    lat, lon = float(m.group(1)), float(m.group(2))
    try:
        point = GeoPoint(lat, lon)
    except ValueError as exc:
        return GeoPrediction(PARSE_FAILED, raw_text, diagnostic=str(exc))
    country = m.group(3).upper()
    ident = m.group(4)
    return GeoPrediction(
        PARSED,
        raw_text,
        point=point,
        country_code=None if country == UNKNOWN_COUNTRY else country,
        chosen_candidate_id=None if ident == "NONE" else int(ident),
    )


def complete_geocode(provider: Provider, request: ProviderRequest) -> GeoPrediction:
    try:
        raw = provider.complete(request)
    except ProviderError as exc:
        return GeoPrediction(PROVIDER_FAILED, "", diagnostic=str(exc))
    return parse_geocode_response(raw)


def _section(prompt: str, header: str) -> str | None:
    start = prompt.find(header + "\n")
    if start < 0:
        return None
    body = prompt[start + len(header) + 1 :]
    end = body.find("\n\n### ")
    return body if end < 0 else body[:end]


class MockProvider:
    """Deterministic stand-in for a chat model.

    Geocoding: among the candidates listed in the prompt, answer the
    highest-population one whose name or English alternate equals the
    mention (case-insensitive); else the rank-1 candidate; with no
    candidates, ``LAT=0 LON=0 COUNTRY=ZZ ID=NONE``. ``policy="population"``
    ignores names and always picks the most populous candidate.

    Country inference: ``country_fixtures`` (lowercased mention -> code)
    first, then the country of the most populous gazetteer entry named
    like the mention, else ``UNKNOWN``.

    ``fail_every=k`` raises :class:`ProviderError` on every k-th geocoding
    request, counted by ``request.seq`` when set, else by call order.
    """

    def __init__(
        self,
        gazetteer: Gazetteer,
        policy: str = "exact_name",
        fail_every: int | None = None,
        country_fixtures: Mapping[str, str] | None = None,
    ):
        if policy not in ("exact_name", "population"):
            raise ValueError(f"unknown mock policy {policy!r}")
        self.gazetteer = gazetteer
        self.policy = policy
        self.fail_every = fail_every
        self.country_fixtures = {k.lower(): v for k, v in (country_fixtures or {}).items()}
        self._counter = itertools.count(1)
        self._lock = threading.Lock()
        self._by_name: dict[str, list[GazetteerEntry]] | None = None

    def complete(self, request: ProviderRequest) -> str:
        if request.task == COUNTRY_TASK:
            return self._country(request.prompt)
        if self.fail_every:
            seq = request.seq
            if seq is None:
                with self._lock:
                    seq = next(self._counter)
            if seq % self.fail_every == 0:
                raise ProviderError(f"injected failure on request {seq}")
        return self._geocode(request.prompt)

    def _names(self, entry: GazetteerEntry) -> set[str]:
        return {n.lower() for n in (entry.name, *entry.alternate_names)}

    def _geocode(self, prompt: str) -> str:
        mention = (_section(prompt, MENTION_HEADER) or "").strip().lower()
        context = _section(prompt, CONTEXT_HEADER) or ""
        entries = [
            self.gazetteer.get(int(i)) for i in _CONTEXT_LINE_RE.findall(context)
        ]
        entries = [e for e in entries if e is not None]
        if not entries:
            return f"LAT=0 LON=0 COUNTRY={UNKNOWN_COUNTRY} ID=NONE"
        if self.policy == "population":
            pool = entries
        else:
            pool = [e for e in entries if mention in self._names(e)] or entries[:1]
        # stable max keeps the earlier (better-ranked) candidate on ties
        chosen = max(pool, key=lambda e: e.population) if len(pool) > 1 else pool[0]
        return format_geocode_answer(
            GeoPrediction(
                PARSED,
                point=GeoPoint(chosen.latitude, chosen.longitude),
                country_code=chosen.country_code,
                chosen_candidate_id=chosen.id,
            )
        )

    def _country(self, prompt: str) -> str:
        mention = (_section(prompt, MENTION_HEADER) or "").strip().lower()
        if mention in self.country_fixtures:
            return self.country_fixtures[mention]
        if self._by_name is None:
            by_name: dict[str, list[GazetteerEntry]] = {}
            for entry in self.gazetteer:
                for name in self._names(entry):
                    by_name.setdefault(name, []).append(entry)
            self._by_name = by_name
        hits = [e for e in self._by_name.get(mention, ()) if e.country_code]
        if not hits:
            return "UNKNOWN"
        return max(hits, key=lambda e: (e.population, -e.id)).country_code


@dataclass
class EndpointConfig:
    url: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-4o-mini"
    timeout: float = 30.0
    retries: int = 3
    backoff: float = 1.0
    api_key_env: str = API_KEY_ENV
    extra_headers: dict = field(default_factory=dict)


class HttpProvider:
    """OpenAI-compatible chat-completions client with retry and backoff."""

    def __init__(self, config: EndpointConfig, session: requests.Session | None = None):
        self.config = config
        self.session = session or requests.Session()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json", **self.config.extra_headers}
        key = os.environ.get(self.config.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, request: ProviderRequest) -> str:
        return http_complete(request, self.config, self.session, self._headers())


def http_complete(
    request: ProviderRequest,
    config: EndpointConfig,
    session: requests.Session | None = None,
    headers: Mapping[str, str] | None = None,
) -> str:
    session = session or requests
    if headers is None:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(config.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
    payload = {
        "model": config.model,
        "messages": [{"role": "user", "content": request.prompt}],
        "temperature": request.temperature,
        "max_tokens": request.max_output_tokens,
        "n": 1,
    }
    timeout = min(request.timeout, config.timeout)
    last = "no attempt made"
    for attempt in range(config.retries + 1):
        if attempt:
            time.sleep(config.backoff * 2 ** (attempt - 1))
        try:
            resp = session.post(config.url, json=payload, headers=dict(headers), timeout=timeout)
        except requests.RequestException as exc:
            last = f"{type(exc).__name__}: {exc}"
            continue
        if resp.status_code == 429 or resp.status_code >= 500:
            last = f"HTTP {resp.status_code}"
            continue
        if not 200 <= resp.status_code < 300:
            raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed response body: {exc!r}") from None
        if isinstance(content, list):
            texts = [p.get("text", "") for p in content if isinstance(p, dict)]
            content = texts[0] if texts else ""
        if not isinstance(content, str):
            raise ProviderError("response content is not text")
        return content
    raise ProviderError(f"gave up after {config.retries + 1} attempts ({last})")
