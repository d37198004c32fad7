"""Great-circle error and the geocoding evaluation measures."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

from newsgeo import kernels

if TYPE_CHECKING:
    from newsgeo.llm import GeoPrediction

EARTH_RADIUS_KM = 6371.0088
# normalizer printed with the AUC definition; kept exact rather than pi * R
AUC_MAX_DISTANCE_KM = 20039.0
ACCURACY_THRESHOLD_KM = 161.0


@dataclass(frozen=True)
class GeoPoint:
    latitude: float
    longitude: float

    def __post_init__(self) -> None:
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude {self.latitude} out of range")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"longitude {self.longitude} out of range")


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    return kernels.haversine_batch(
        [a.latitude], [a.longitude], [b.latitude], [b.longitude], EARTH_RADIUS_KM
    )[0]


def _require(errors: Sequence[float]) -> None:
    if len(errors) == 0:
        raise ValueError("need at least one error value")


def mean_error(errors: Sequence[float]) -> float:
    _require(errors)
    return math.fsum(errors) / len(errors)


def accuracy_at_161(errors: Sequence[float]) -> float:
    """Fraction of errors strictly below 161 km."""
    _require(errors)
    return sum(1 for e in errors if e < ACCURACY_THRESHOLD_KM) / len(errors)


def auc(errors: Sequence[float]) -> float:
    """Normalized area under the log-error curve (lower is better).

    Rectangle sum of ln(e + 1) over the errors, divided by
    ``n * ln(20039)`` and clamped to [0, 1].
    """
    _require(errors)
    if any(e < 0 for e in errors):
        raise ValueError("errors must be non-negative")
    total = math.fsum(math.log1p(e) for e in errors)
    value = total / (len(errors) * math.log(AUC_MAX_DISTANCE_KM))
    return min(1.0, max(0.0, value))


@dataclass
class EvalRecord:
    mention_id: str
    gold: GeoPoint
    gold_country: str | None = None
    gold_population: int | None = None
    prediction: "GeoPrediction | None" = None
    error_km: float | None = None

    @property
    def parsed(self) -> bool:
        return self.prediction is not None and self.prediction.status == "parsed"


def score_records(records: Iterable[EvalRecord]) -> list[EvalRecord]:
    """Fill ``error_km`` for every record with a parsed prediction."""
    records = list(records)
    todo = [r for r in records if r.parsed]
    dists = kernels.haversine_batch(
        [r.gold.latitude for r in todo],
        [r.gold.longitude for r in todo],
        [r.prediction.point.latitude for r in todo],
        [r.prediction.point.longitude for r in todo],
        EARTH_RADIUS_KM,
    )
    for rec in records:
        rec.error_km = None
    for rec, d in zip(todo, dists):
        rec.error_km = d
    return records


def country_accuracy(records: Iterable[EvalRecord]) -> float | None:
    """Share of eligible records whose predicted country matches gold.

    Eligible means a gold country exists (continents, oceans and similar
    carry none) and the parsed prediction names a country.
    """
    hits = total = 0
    for rec in records:
        if not rec.gold_country or not rec.parsed or not rec.prediction.country_code:
            continue
        total += 1
        hits += rec.prediction.country_code.upper() == rec.gold_country.upper()
    return hits / total if total else None


@dataclass
class MetricsReport:
    mean_error_km: float | None
    accuracy_at_161: float | None
    country_accuracy: float | None
    auc: float | None
    num_responses: int
    total_mentions: int

    COLUMNS = ("MErr", "A@161", "CAcc", "AUC", "Num")

    def to_dict(self) -> dict:
        return {
            "mean_error_km": self.mean_error_km,
            "accuracy_at_161": self.accuracy_at_161,
            "country_accuracy": self.country_accuracy,
            "auc": self.auc,
            "num_responses": self.num_responses,
            "total_mentions": self.total_mentions,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsReport":
        return cls(**{k: data[k] for k in cls.__dataclass_fields__})

    def to_keyvalue(self) -> str:
        return "\n".join(
            f"{k}={'' if v is None else v}" for k, v in self.to_dict().items()
        ) + "\n"

    def table_cells(self) -> list[str]:
        def frac(v: float | None) -> str:
            return "-" if v is None else f"{v:.3f}"

        merr = "-" if self.mean_error_km is None else f"{self.mean_error_km:.2f}"
        return [
            merr,
            frac(self.accuracy_at_161),
            frac(self.country_accuracy),
            frac(self.auc),
            str(self.num_responses),
        ]


def summarize(records: Sequence[EvalRecord]) -> MetricsReport:
    if not records:
        raise ValueError("no records to summarize")
    parsed = [r for r in records if r.parsed]
    for r in parsed:
        if r.error_km is None:
            r.error_km = haversine_km(r.gold, r.prediction.point)
    if not parsed:
        return MetricsReport(None, None, None, None, 0, len(records))
    errors = [r.error_km for r in parsed]
    return MetricsReport(
        mean_error_km=mean_error(errors),
        accuracy_at_161=accuracy_at_161(errors),
        country_accuracy=country_accuracy(parsed),
        auc=auc(errors),
        num_responses=len(parsed),
        total_mentions=len(records),
    )


@dataclass
class BucketResult:
    low: float
    high: float
    count: int
    accuracy_at_161: float | None = field(default=None)

    def label(self) -> str:
        def fmt(v: float) -> str:
            return "inf" if math.isinf(v) else f"{v:g}"

        return f"[{fmt(self.low)}, {fmt(self.high)})"


def population_bucket_accuracy(
    records: Iterable[EvalRecord], bucket_edges: Sequence[float]
) -> list[BucketResult]:
    """A@161 per half-open population bucket ``[edges[i], edges[i+1])``.

    Records without a gold population or a scored prediction are skipped;
    empty buckets report ``accuracy_at_161=None``.
    """
    edges = list(bucket_edges)
    if len(edges) < 2:
        raise ValueError("need at least two bucket edges")
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError("bucket edges must be strictly increasing")
    groups: list[list[float]] = [[] for _ in edges[:-1]]
    for rec in records:
        if rec.gold_population is None or not rec.parsed:
            continue
        err = rec.error_km
        if err is None:
            err = haversine_km(rec.gold, rec.prediction.point)
        for i, (lo, hi) in enumerate(zip(edges, edges[1:])):
            if lo <= rec.gold_population < hi:
                groups[i].append(err)
                break
    return [
        BucketResult(lo, hi, len(g), accuracy_at_161(g) if g else None)
        for (lo, hi), g in zip(zip(edges, edges[1:]), groups)
    ]
