"""BM25 inverted index over gazetteer names.

Each gazetteer entry is one document whose token stream is its name,
English alternate names and abbreviations concatenated. Coordinates,
country and population are stored payload, never tokenized.
"""

from __future__ import annotations

import math
import pickle
import re
import struct
import unicodedata
from array import array
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from newsgeo import kernels
from newsgeo.gazetteer import Gazetteer, GazetteerEntry

K1 = 1.2
B = 0.75
DEFAULT_DEPTH = 100

SNAPSHOT_MAGIC = b"NGEOIDX\x00"
SNAPSHOT_VERSION = 1

_WORD_RE = re.compile(r"\w+")


class SnapshotError(RuntimeError):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercase, fold diacritics where NFKD offers a fold, split on word chars."""
    if not text:
        return []
    decomposed = unicodedata.normalize("NFKD", text.lower())
    folded = "".join(ch for ch in decomposed if not unicodedata.combining(ch))
    return _WORD_RE.findall(folded)


def idf(doc_count: int, doc_freq: int) -> float:
    return math.log(1.0 + (doc_count - doc_freq + 0.5) / (doc_freq + 0.5))


@dataclass(frozen=True)
class ScoredMatch:
    entry_id: int
    score: float
    population: int


@dataclass(frozen=True)
class Candidate:
    entry: GazetteerEntry
    retrieval_score: float
    rank: int


class SearchIndex:
    """Immutable BM25 index; safe for concurrent queries once built.

    Documents are numbered densely in ascending entry-id order, so postings
    sorted by doc number are also sorted by entry id.
    """

    def __init__(self, source: Gazetteer, postings, doc_lengths, ids):
        self.source = source
        self._postings: dict[str, tuple[array, array]] = postings
        self._doc_lengths: array = doc_lengths
        self._ids: array = ids
        self._slot = {entry_id: i for i, entry_id in enumerate(ids)}
        self.doc_count = len(ids)
        self.avg_doc_length = sum(doc_lengths) / self.doc_count
        # interned country per doc slot so the kernel can filter without objects
        self._country_code: dict[str, int] = {}
        codes = array("i")
        for eid in ids:
            cc = source.get(eid).country_code
            codes.append(self._country_code.setdefault(cc, len(self._country_code)))
        self._doc_country = codes

    @property
    def doc_lengths(self) -> dict[int, int]:
        return {eid: int(n) for eid, n in zip(self._ids, self._doc_lengths)}

    @property
    def postings(self) -> dict[str, list[tuple[int, int]]]:
        ids = self._ids
        return {
            tok: [(ids[d], tf) for d, tf in zip(docs, tfs)]
            for tok, (docs, tfs) in self._postings.items()
        }

    def doc_freq(self, token: str) -> int:
        hit = self._postings.get(token)
        return len(hit[0]) if hit else 0

    def term_frequency(self, token: str, entry_id: int) -> int:
        slot = self._slot.get(entry_id)
        hit = self._postings.get(token)
        if slot is None or hit is None:
            return 0
        docs, tfs = hit
        lo, hi = 0, len(docs)
        while lo < hi:
            mid = (lo + hi) // 2
            if docs[mid] < slot:
                lo = mid + 1
            else:
                hi = mid
        return tfs[lo] if lo < len(docs) and docs[lo] == slot else 0

    def doc_length(self, entry_id: int) -> int:
        return int(self._doc_lengths[self._slot[entry_id]])

    def entry(self, entry_id: int) -> GazetteerEntry:
        return self.source.get(entry_id)

    def _plan(self, query_tokens: Sequence[str]) -> list:
        plan = []
        for tok in dict.fromkeys(query_tokens):
            hit = self._postings.get(tok)
            if hit is not None:
                plan.append((hit[0], hit[1], idf(self.doc_count, len(hit[0]))))
        return plan

    def top_k(
        self, query_tokens: Sequence[str], depth: int, country: str | None = None
    ) -> list[tuple[int, float]]:
        """Best ``depth`` ``(entry_id, score)`` pairs, optionally one country only."""
        plan = self._plan(query_tokens)
        code = -1
        if country is not None:
            code = self._country_code.get(country, -2)
            if code == -2:
                return []
        docs, scores = kernels.bm25_topk(
            plan, self._doc_lengths, self.avg_doc_length, K1, B,
            self._doc_country, code, depth,
        )
        ids = self._ids
        return [(ids[d], s) for d, s in zip(docs, scores)]

    def score_all(self, query_tokens: Sequence[str]) -> list[tuple[int, float]]:
        """``(entry_id, score)`` for every doc sharing a token with the query."""
        plan = self._plan(query_tokens)
        docs, scores = kernels.bm25_accumulate(
            plan, self._doc_lengths, self.avg_doc_length, K1, B
        )
        ids = self._ids
        return [(ids[d], s) for d, s in zip(docs, scores)]


def build_index(gazetteer: Gazetteer) -> SearchIndex:
    if gazetteer.count == 0:
        raise ValueError("cannot index an empty gazetteer")
    ids = array("q", gazetteer.ids())
    lengths = array("d")
    acc: dict[str, tuple[array, array]] = {}
    for slot, entry_id in enumerate(ids):
        entry = gazetteer.get(entry_id)
        tokens: list[str] = []
        for name in entry.searchable_names:
            tokens.extend(tokenize(name))
        lengths.append(float(len(tokens)))
        for tok, tf in Counter(tokens).items():
            hit = acc.get(tok)
            if hit is None:
                hit = acc[tok] = (array("q"), array("i"))
            hit[0].append(slot)
            hit[1].append(tf)
    return SearchIndex(gazetteer, acc, lengths, ids)


def bm25_score(query_tokens: Sequence[str], entry_id: int, index: SearchIndex) -> float:
    """Score a single document; mirrors the batched path in ``score_all``."""
    if entry_id not in index.source:
        raise KeyError(f"unknown entry id {entry_id}")
    doc_len = index.doc_length(entry_id)
    norm = K1 * (1.0 - B + B * doc_len / index.avg_doc_length)
    total = 0.0
    for tok in dict.fromkeys(query_tokens):
        tf = index.term_frequency(tok, entry_id)
        if tf:
            w = idf(index.doc_count, index.doc_freq(tok))
            total += w * (tf * (K1 + 1.0)) / (tf + norm)
    return total


def _by_score(pairs: Iterable[ScoredMatch]) -> list[ScoredMatch]:
    return sorted(pairs, key=lambda m: (-m.score, m.entry_id))


def search(
    index: SearchIndex,
    mention_text: str,
    country_filter: str | None = None,
    depth: int = DEFAULT_DEPTH,
) -> list[ScoredMatch]:
    """Top ``depth`` matches by (score desc, entry id asc).

    The country filter drops other countries before truncation; when it
    leaves nothing, the unfiltered ranking is returned instead.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    tokens = tokenize(mention_text)
    scored = index.top_k(tokens, depth, country_filter.upper()) if country_filter else []
    if not scored:
        scored = index.top_k(tokens, depth)
    get = index.source.get
    return [ScoredMatch(eid, s, get(eid).population) for eid, s in scored]


def rerank_by_population(
    matches: Sequence[ScoredMatch], k: int, gazetteer: Gazetteer
) -> list[Candidate]:
    if k < 1:
        raise ValueError("k must be >= 1")
    ordered = sorted(matches, key=lambda m: (-m.population, -m.score, m.entry_id))
    return [
        Candidate(gazetteer.get(m.entry_id), m.score, rank)
        for rank, m in enumerate(ordered[:k], start=1)
    ]


def top_by_score(
    matches: Sequence[ScoredMatch], k: int, gazetteer: Gazetteer
) -> list[Candidate]:
    """Truncate without the population heuristic."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return [
        Candidate(gazetteer.get(m.entry_id), m.score, rank)
        for rank, m in enumerate(_by_score(matches)[:k], start=1)
    ]


def save_index(index: SearchIndex, path: str | Path) -> None:
    payload = pickle.dumps(
        {
            "entries": [e.to_dict() for e in index.source],
            "stats": index.source.stats,
            "postings": index._postings,
            "doc_lengths": index._doc_lengths,
            "ids": index._ids,
        },
        protocol=pickle.HIGHEST_PROTOCOL,
    )
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<I", SNAPSHOT_VERSION))
        fh.write(payload)


def load_index(path: str | Path) -> SearchIndex:
    with open(path, "rb") as fh:
        magic = fh.read(len(SNAPSHOT_MAGIC))
        if magic != SNAPSHOT_MAGIC:
            raise SnapshotError(f"{path}: not an index snapshot")
        raw = fh.read(4)
        if len(raw) != 4:
            raise SnapshotError(f"{path}: truncated header")
        (version,) = struct.unpack("<I", raw)
        if version != SNAPSHOT_VERSION:
            raise SnapshotError(
                f"{path}: snapshot format {version}, this build reads {SNAPSHOT_VERSION}"
            )
        data = pickle.loads(fh.read())
    gazetteer = Gazetteer(
        (GazetteerEntry.from_dict(d) for d in data["entries"]), stats=data["stats"]
    )
    return SearchIndex(gazetteer, data["postings"], data["doc_lengths"], data["ids"])
