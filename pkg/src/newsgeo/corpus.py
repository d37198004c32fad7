"""Evaluation corpora.

Every consumer works on the normalized JSON form (``write_normalized`` /
``load_normalized``). The adapters read the XML releases of GeoVirus,
GeoWebNews and LGL, which share a layout of ``<article>`` elements each holding
a ``<text>`` body and a list of ``<location>``/``<toponym>`` annotations::

    <toponym>
      <start>12</start><end>18</end><phrase>London</phrase>
      <type>Literal</type>                          (GeoWebNews only)
      <gaztag geonameid="2643743"><lat>51.5</lat><lon>-0.12</lon></gaztag>
    </toponym>

GeoVirus uses ``<location>`` with ``<name>``, ``<start>``, ``<end>``,
``<lat>``, ``<lon>``. Tag names are matched case-insensitively and the
coordinates/ids are searched anywhere under the annotation, so small layout
variations between releases are tolerated. Offsets that do not match the
surface form are repaired by searching nearby; irreparable ones are counted
in ``Corpus.anomalies`` and skipped.
"""

from __future__ import annotations

import json
import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from newsgeo.gazetteer import Gazetteer
from newsgeo.metrics import GeoPoint

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
ADAPTER_VERSION = "1"

GEOWEBNEWS_TYPES = frozenset(
    {"literal", "literal modifier", "mixed", "coercion", "embedded literal"}
)
_REPAIR_WINDOW = 64


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Article:
    article_id: str
    body: str

    def __post_init__(self) -> None:
        if not self.body:
            raise CorpusError(f"article {self.article_id!r} has an empty body")


@dataclass(frozen=True)
class GoldMention:
    mention_id: str
    article_id: str
    surface: str
    char_start: int
    char_end: int
    gold_point: GeoPoint
    gold_geonames_id: int | None = None
    gold_country: str | None = None
    gold_population: int | None = None

    def to_dict(self) -> dict:
        return {
            "mention_id": self.mention_id,
            "article_id": self.article_id,
            "surface": self.surface,
            "char_start": self.char_start,
            "char_end": self.char_end,
            "latitude": self.gold_point.latitude,
            "longitude": self.gold_point.longitude,
            "gold_geonames_id": self.gold_geonames_id,
            "gold_country": self.gold_country,
            "gold_population": self.gold_population,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GoldMention":
        return cls(
            mention_id=d["mention_id"],
            article_id=d["article_id"],
            surface=d["surface"],
            char_start=d["char_start"],
            char_end=d["char_end"],
            gold_point=GeoPoint(d["latitude"], d["longitude"]),
            gold_geonames_id=d.get("gold_geonames_id"),
            gold_country=d.get("gold_country"),
            gold_population=d.get("gold_population"),
        )


@dataclass
class Corpus:
    articles: list[Article] = field(default_factory=list)
    mentions: list[GoldMention] = field(default_factory=list)
    dataset: str = "synthetic"
    adapter_version: str = ADAPTER_VERSION
    anomalies: int = 0

    def __post_init__(self) -> None:
        self._by_id = {a.article_id: a for a in self.articles}
        if len(self._by_id) != len(self.articles):
            raise CorpusError("duplicate article ids")
        seen: set[str] = set()
        for m in self.mentions:
            if m.mention_id in seen:
                raise CorpusError(f"duplicate mention id {m.mention_id!r}")
            seen.add(m.mention_id)
            art = self._by_id.get(m.article_id)
            if art is None:
                raise CorpusError(f"mention {m.mention_id!r} references unknown article")
            if not 0 <= m.char_start < m.char_end <= len(art.body):
                raise CorpusError(f"mention {m.mention_id!r} offsets outside article body")
            if art.body[m.char_start : m.char_end] != m.surface:
                raise CorpusError(f"mention {m.mention_id!r} surface does not match body")

    def article(self, article_id: str) -> Article:
        return self._by_id[article_id]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Corpus):
            return NotImplemented
        return (
            self.articles == other.articles
            and self.mentions == other.mentions
            and self.dataset == other.dataset
            and self.adapter_version == other.adapter_version
        )


def write_normalized(corpus: Corpus, path: str | Path) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "provenance": {"dataset": corpus.dataset, "adapter_version": corpus.adapter_version},
        "articles": [{"article_id": a.article_id, "body": a.body} for a in corpus.articles],
        "mentions": [m.to_dict() for m in corpus.mentions],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, ensure_ascii=False, indent=1)
        fh.write("\n")


def load_normalized(path: str | Path) -> Corpus:
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        return Corpus()
    doc = json.loads(text)
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise CorpusError(f"{path}: schema_version {version!r}, expected {SCHEMA_VERSION}")
    prov = doc.get("provenance", {})
    try:
        return Corpus(
            articles=[Article(a["article_id"], a["body"]) for a in doc.get("articles", [])],
            mentions=[GoldMention.from_dict(m) for m in doc.get("mentions", [])],
            dataset=prov.get("dataset", "unknown"),
            adapter_version=prov.get("adapter_version", ADAPTER_VERSION),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorpusError(f"{path}: invalid corpus ({exc})") from exc


# --- XML adapters -----------------------------------------------------------


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1].lower()


def _child_text(elem: ET.Element, *names: str) -> str | None:
    wanted = set(names)
    for child in elem:
        if _local(child.tag) in wanted:
            return child.text or ""
    return None


def _find_anywhere(elem: ET.Element, *names: str) -> str | None:
    wanted = set(names)
    for node in elem.iter():
        if _local(node.tag) in wanted and node.text and node.text.strip():
            return node.text.strip()
    return None


def _find_geonames_id(elem: ET.Element) -> int | None:
    for node in elem.iter():
        for key, value in node.attrib.items():
            if key.lower() in ("geonameid", "geonamesid", "geonames_id") and value.strip():
                try:
                    return int(value)
                except ValueError:
                    return None
    text = _find_anywhere(elem, "geonameid", "geonamesid", "geonames_id")
    if text:
        try:
            return int(text)
        except ValueError:
            return None
    return None


def _iter_files(dataset_path: Path) -> list[Path]:
    if dataset_path.is_dir():
        files = sorted(dataset_path.glob("*.xml"))
        if not files:
            raise FileNotFoundError(f"no XML files under {dataset_path}")
        return files
    if not dataset_path.exists():
        raise FileNotFoundError(dataset_path)
    return [dataset_path]


def _iter_articles(dataset_path: Path) -> Iterator[tuple[str, ET.Element]]:
    ordinal = 0
    for path in _iter_files(dataset_path):
        root = ET.parse(path).getroot()
        nodes = [root] if _local(root.tag) == "article" else [
            n for n in root.iter() if _local(n.tag) == "article"
        ]
        for node in nodes:
            ordinal += 1
            ident = node.get("docid") or node.get("id") or f"{ordinal:05d}"
            yield ident, node


@dataclass
class _RawToponym:
    surface: str
    start: int
    end: int
    lat: float | None
    lon: float | None
    toponym_type: str | None
    geonames_id: int | None


def _raw_toponyms(article: ET.Element) -> Iterator[_RawToponym | None]:
    for node in article.iter():
        if _local(node.tag) not in ("toponym", "location"):
            continue
        try:
            start = int(_child_text(node, "start") or node.get("start"))
            end = int(_child_text(node, "end") or node.get("end"))
        except (TypeError, ValueError):
            yield None
            continue
        surface = _child_text(node, "phrase", "name")
        lat = _find_anywhere(node, "lat", "latitude")
        lon = _find_anywhere(node, "lon", "long", "longitude")
        try:
            latf = float(lat) if lat is not None else None
            lonf = float(lon) if lon is not None else None
        except ValueError:
            latf = lonf = None
        ttype = _child_text(node, "type") or node.get("type")
        yield _RawToponym(
            surface=(surface or "").strip(),
            start=start,
            end=end,
            lat=latf,
            lon=lonf,
            toponym_type=ttype.strip() if ttype else None,
            geonames_id=_find_geonames_id(node),
        )


def _align(body: str, top: _RawToponym) -> tuple[int, int, str] | None:
    if not top.surface:
        if 0 <= top.start < top.end <= len(body):
            return top.start, top.end, body[top.start : top.end]
        return None
    if body[top.start : top.end] == top.surface:
        return top.start, top.end, top.surface
    lo = max(0, top.start - _REPAIR_WINDOW)
    hits = []
    pos = body.find(top.surface, lo)
    while 0 <= pos <= top.start + _REPAIR_WINDOW:
        hits.append(pos)
        pos = body.find(top.surface, pos + 1)
    if not hits:
        return None
    best = min(hits, key=lambda p: (abs(p - top.start), p))
    return best, best + len(top.surface), top.surface


def _article_body(node: ET.Element) -> str:
    body = _child_text(node, "text")
    return body if body is not None else ""


def _build(
    dataset: str,
    dataset_path: Path,
    keep,
    gazetteer: Gazetteer | None,
    countries: dict[str, str] | None = None,
) -> Corpus:
    articles: list[Article] = []
    mentions: list[GoldMention] = []
    anomalies = 0
    for ident, node in _iter_articles(dataset_path):
        article_id = f"{dataset}-{ident}"
        body = _article_body(node)
        if not body:
            anomalies += 1
            continue
        articles.append(Article(article_id, body))
        ordinal = 0
        for top in _raw_toponyms(node):
            if top is None:
                anomalies += 1
                continue
            if not keep(top):
                continue
            if top.lat is None or top.lon is None:
                anomalies += 1
                continue
            span = _align(body, top)
            try:
                point = GeoPoint(top.lat, top.lon)
            except ValueError:
                span = None
            if span is None:
                anomalies += 1
                continue
            start, end, surface = span
            mention_id = f"{article_id}:{ordinal:04d}"
            ordinal += 1
            country = population = None
            if gazetteer is not None and top.geonames_id is not None:
                entry = gazetteer.get(top.geonames_id)
                if entry is not None:
                    country = entry.country_code
                    population = entry.population
            if countries is not None:
                country = countries.get(mention_id) or countries.get(
                    f"{article_id}:{start}:{end}"
                )
            mentions.append(
                GoldMention(
                    mention_id=mention_id,
                    article_id=article_id,
                    surface=surface,
                    char_start=start,
                    char_end=end,
                    gold_point=point,
                    gold_geonames_id=top.geonames_id,
                    gold_country=country,
                    gold_population=population,
                )
            )
    if anomalies:
        log.warning("%s: skipped %d malformed annotations", dataset, anomalies)
    return Corpus(articles, mentions, dataset=dataset, anomalies=anomalies)


def _normalize_type(value: str | None) -> str:
    return " ".join((value or "").replace("_", " ").replace("-", " ").lower().split())


def parse_geowebnews(dataset_path: str | Path, gazetteer: Gazetteer | None = None) -> Corpus:
    """Keep only the locational toponym types (Literal, Literal Modifier, ...)."""
    return _build(
        "geowebnews",
        Path(dataset_path),
        lambda t: _normalize_type(t.toponym_type) in GEOWEBNEWS_TYPES,
        gazetteer,
    )


def parse_lgl(dataset_path: str | Path, gazetteer: Gazetteer | None = None) -> Corpus:
    """Drop toponyms without gold coordinates."""
    return _build(
        "lgl",
        Path(dataset_path),
        lambda t: t.lat is not None and t.lon is not None,
        gazetteer,
    )


def load_country_annotations(path: str | Path) -> dict[str, str]:
    """Sidecar mapping ``mention_id`` (or ``article:start:end``) to country code.

    Accepts a JSON object or a two-column TSV.
    """
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        raw = json.loads(text)
    else:
        raw = {}
        for line in text.splitlines():
            parts = line.split("\t")
            if len(parts) >= 2 and parts[0] and not line.startswith("#"):
                raw[parts[0]] = parts[1]
    return {k: v.strip().upper() for k, v in raw.items() if v and v.strip()}


def parse_geovirus(
    dataset_path: str | Path, country_annotations_path: str | Path | None = None
) -> Corpus:
    """Keep every annotation; countries come from the offline sidecar."""
    countries = load_country_annotations(country_annotations_path) if country_annotations_path else {}
    return _build("geovirus", Path(dataset_path), lambda t: True, None, countries)
