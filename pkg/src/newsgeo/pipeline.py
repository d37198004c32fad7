"""End-to-end geocoding runs and the baseline/ablation variants."""

from __future__ import annotations

import dataclasses
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from newsgeo.corpus import Article, Corpus, GoldMention
from newsgeo.index import (
    Candidate,
    SearchIndex,
    rerank_by_population,
    search,
    top_by_score,
)
from newsgeo.llm import (
    PARSE_FAILED,
    PARSED,
    PROVIDER_FAILED,
    EndpointConfig,
    GeoPrediction,
    HttpProvider,
    MockProvider,
    PromptBundle,
    PromptFlags,
    Provider,
    ProviderRequest,
    build_geocoding_prompt,
    complete_geocode,
    infer_country,
)
from newsgeo.metrics import EvalRecord, GeoPoint, MetricsReport, score_records, summarize

log = logging.getLogger(__name__)

VARIANTS = (
    "raccoon",
    "rag_base",
    "llm_base",
    "gazetteer_base",
    "minus_candidates",
    "minus_country",
    "minus_features",
    "minus_population",
    "minus_state",
)


@dataclass
class PipelineConfig:
    candidate_count: int = 20
    retrieval_depth: int = 100
    country_assisted: bool = True
    population_rerank: bool = True
    feature_types: bool = True
    state_context: bool = True
    retrieval_enabled: bool = True
    # False means predictions come straight from the index top-1 match
    use_provider: bool = True
    provider: dict = field(default_factory=lambda: {"kind": "mock"})
    max_in_flight: int = 1
    per_request_timeout: float = 30.0
    variant: str = "raccoon"

    def __post_init__(self) -> None:
        if self.candidate_count < 1:
            raise ValueError("candidate_count must be >= 1")
        if self.candidate_count > self.retrieval_depth:
            raise ValueError("candidate_count must not exceed retrieval_depth")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")

    @property
    def flags(self) -> PromptFlags:
        return PromptFlags(feature_types=self.feature_types, state_context=self.state_context)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)


def config_for_variant(name: str, **overrides: Any) -> PipelineConfig:
    if name not in VARIANTS:
        raise ValueError(f"unknown variant {name!r}; valid: {', '.join(VARIANTS)}")
    cfg: dict[str, Any] = {"variant": name}
    if name == "rag_base":
        cfg.update(
            candidate_count=10,
            country_assisted=False,
            population_rerank=False,
            feature_types=False,
            state_context=False,
        )
    elif name == "llm_base":
        cfg.update(
            retrieval_enabled=False,
            country_assisted=False,
            population_rerank=False,
            feature_types=False,
            state_context=False,
        )
    elif name == "gazetteer_base":
        cfg.update(
            use_provider=False,
            country_assisted=False,
            population_rerank=False,
            feature_types=False,
            state_context=False,
        )
    elif name == "minus_candidates":
        cfg["candidate_count"] = 1
    elif name == "minus_country":
        cfg["country_assisted"] = False
    elif name == "minus_features":
        cfg["feature_types"] = False
    elif name == "minus_population":
        cfg["population_rerank"] = False
    elif name == "minus_state":
        cfg["state_context"] = False
    cfg.update(overrides)
    return PipelineConfig(**cfg)


def load_config(path: str | Path) -> PipelineConfig:
    """Read a JSON run config; an optional ``variant`` key seeds the defaults."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    variant = data.pop("variant", "raccoon")
    return config_for_variant(variant, **data)


def make_provider(config: PipelineConfig, index: SearchIndex | None) -> Provider:
    spec = dict(config.provider)
    kind = spec.pop("kind", "mock")
    if kind == "mock":
        if index is None:
            raise ValueError("the mock provider needs an index")
        return MockProvider(
            index.source,
            policy=spec.get("policy", "exact_name"),
            fail_every=spec.get("fail_every"),
            country_fixtures=spec.get("country_fixtures"),
        )
    if kind == "http":
        fields = {f.name for f in dataclasses.fields(EndpointConfig)}
        return HttpProvider(EndpointConfig(**{k: v for k, v in spec.items() if k in fields}))
    raise ValueError(f"unknown provider kind {kind!r}")


@dataclass
class MentionTrace:
    """What the pipeline did for one mention."""

    country: str | None
    candidates: list[Candidate]
    bundle: PromptBundle | None
    country_fallback: bool = False


def prepare_mention(
    article: Article,
    mention: GoldMention,
    index: SearchIndex | None,
    provider: Provider | None,
    config: PipelineConfig,
) -> MentionTrace:
    """Steps before the geocoding call: country, retrieval, prompt."""
    country = None
    fallback = False
    if config.country_assisted and config.retrieval_enabled and provider is not None:
        country = infer_country(article.body, mention.surface, provider, config.per_request_timeout)
        fallback = country is None
    candidates: list[Candidate] = []
    if config.retrieval_enabled:
        if index is None:
            raise ValueError("retrieval is enabled but no index was given")
        matches = search(index, mention.surface, country, config.retrieval_depth)
        if config.population_rerank:
            candidates = rerank_by_population(matches, config.candidate_count, index.source)
        else:
            candidates = top_by_score(matches, config.candidate_count, index.source)
    bundle = None
    if config.use_provider:
        bundle = build_geocoding_prompt(candidates, mention.surface, article.body, config.flags)
    return MentionTrace(country, candidates, bundle, fallback)


def gazetteer_top_match(trace: MentionTrace) -> GeoPrediction:
    if not trace.candidates:
        return GeoPrediction(PARSE_FAILED, "", diagnostic="no gazetteer match")
    entry = trace.candidates[0].entry
    return GeoPrediction(
        PARSED,
        "",
        point=GeoPoint(entry.latitude, entry.longitude),
        country_code=entry.country_code,
        chosen_candidate_id=entry.id,
    )


def geocode_mention(
    article: Article,
    mention: GoldMention,
    index: SearchIndex | None,
    provider: Provider | None,
    config: PipelineConfig,
    seq: int | None = None,
) -> GeoPrediction:
    return _geocode(article, mention, index, provider, config, seq)[0]


def _geocode(article, mention, index, provider, config, seq):
    trace = prepare_mention(article, mention, index, provider, config)
    if not config.use_provider:
        return gazetteer_top_match(trace), trace
    request = ProviderRequest(
        prompt=trace.bundle.render(),
        timeout=config.per_request_timeout,
        seq=seq,
    )
    return complete_geocode(provider, request), trace


@dataclass
class RunResult:
    records: list[EvalRecord]
    report: MetricsReport
    config: PipelineConfig
    counters: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "counters": dict(sorted(self.counters.items())),
            "report": self.report.to_dict(),
            "records": [
                {
                    "mention_id": r.mention_id,
                    "gold_latitude": r.gold.latitude,
                    "gold_longitude": r.gold.longitude,
                    "gold_country": r.gold_country,
                    "gold_population": r.gold_population,
                    "error_km": r.error_km,
                    "prediction": None if r.prediction is None else r.prediction.to_dict(),
                }
                for r in self.records
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True, ensure_ascii=False) + "\n"


def run_pipeline(
    corpus: Corpus,
    index: SearchIndex | None,
    config: PipelineConfig,
    provider: Provider | None = None,
) -> RunResult:
    """Geocode every mention once and score the batch.

    Geocoding requests are numbered by the mention's position in
    ``mention_id`` order, so fault injection and the final record order do
    not depend on ``max_in_flight``.
    """
    if not corpus.mentions:
        raise ValueError("corpus has no mentions")
    if provider is None and config.use_provider:
        provider = make_provider(config, index)
    mentions = sorted(corpus.mentions, key=lambda m: m.mention_id)
    fallbacks = 0
    lock = threading.Lock()

    def work(item: tuple[int, GoldMention]) -> EvalRecord:
        nonlocal fallbacks
        seq, mention = item
        pred, trace = _geocode(
            corpus.article(mention.article_id), mention, index, provider, config, seq
        )
        if trace.country_fallback:
            with lock:
                fallbacks += 1
        return EvalRecord(
            mention_id=mention.mention_id,
            gold=mention.gold_point,
            gold_country=mention.gold_country,
            gold_population=mention.gold_population,
            prediction=pred,
        )

    items = list(enumerate(mentions, start=1))
    if config.max_in_flight == 1:
        records = [work(it) for it in items]
    else:
        with ThreadPoolExecutor(max_workers=config.max_in_flight) as pool:
            records = list(pool.map(work, items))
    records.sort(key=lambda r: r.mention_id)
    score_records(records)
    statuses = [r.prediction.status for r in records]
    counters = {
        "total_mentions": len(records),
        "parsed": statuses.count(PARSED),
        "parse_failures": statuses.count(PARSE_FAILED),
        "provider_failures": statuses.count(PROVIDER_FAILED),
        "country_fallbacks": fallbacks,
    }
    return RunResult(records, summarize(records), config, counters)
