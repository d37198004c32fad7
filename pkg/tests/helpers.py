"""Synthetic fixtures and independent oracles shared by the test modules."""

from __future__ import annotations

import math
import random

from newsgeo.corpus import Article, Corpus, GoldMention
from newsgeo.gazetteer import Gazetteer, GazetteerEntry
from newsgeo.metrics import GeoPoint

COUNTRIES = ["AU", "GB", "US", "FR", "DE", "IN", "BR", "ZA", "CA", "NZ"]
STATES = {"AU": "New South Wales", "GB": "England", "US": "Illinois", "CA": "Ontario"}
SYLLABLES = ["ka", "ro", "mel", "bin", "tor", "sa", "lu", "van", "dor", "pe", "qui", "zan"]


def entry(id, name, lat=0.0, lon=0.0, cc="AU", pop=0, admin1=None, code="PPL", alts=(), abbrs=()):
    return GazetteerEntry(
        id=id,
        name=name,
        latitude=lat,
        longitude=lon,
        feature_class=code[0] if code else "",
        feature_code=code,
        country_code=cc,
        admin1=admin1,
        population=pop,
        alternate_names=list(alts),
        abbreviations=list(abbrs),
    )


def brute_bm25(docs: dict[int, list[str]], query: list[str], k1=1.2, b=0.75) -> dict[int, float]:
    """Direct evaluation of the BM25 formula on raw token lists.

    Deliberately recomputes N, df, avgdl and tf from scratch for every
    document; shares nothing with the index code.
    """
    n = len(docs)
    avg = sum(len(t) for t in docs.values()) / n
    out = {}
    for d, toks in docs.items():
        total = 0.0
        matched = False
        for q in dict.fromkeys(query):
            tf = toks.count(q)
            if tf == 0:
                continue
            matched = True
            df = sum(1 for t in docs.values() if q in t)
            w = math.log(1 + (n - df + 0.5) / (df + 0.5))
            total += w * (tf * (k1 + 1)) / (tf + k1 * (1 - b + b * len(toks) / avg))
        if matched:
            out[d] = total
    return out


def random_name(rng: random.Random, words=(1, 3)) -> str:
    parts = []
    for _ in range(rng.randint(*words)):
        parts.append("".join(rng.choice(SYLLABLES) for _ in range(rng.randint(1, 3))).title())
    return " ".join(parts)


def synthetic_world(n_entries=500, n_mentions=50, seed=7, unique_gold=False):
    """Gazetteer plus a corpus whose gold locations are indexed exact-match entries.

    Each gold entry is the most populous entry sharing its exact name, and
    decoys reuse the name in other countries with smaller populations, so
    country inference, population re-ranking and exact-name choice all
    have something to do.
    """
    rng = random.Random(seed)
    entries: list[GazetteerEntry] = []
    used_names: set[str] = set()
    golds: list[GazetteerEntry] = []
    next_id = 1000

    def new_id():
        nonlocal next_id
        next_id += rng.randint(1, 9)
        return next_id

    while len(golds) < n_mentions:
        name = random_name(rng, (1, 2))
        if name in used_names:
            continue
        used_names.add(name)
        cc = rng.choice(COUNTRIES)
        gold = entry(
            new_id(), name, round(rng.uniform(-60, 70), 4), round(rng.uniform(-179, 179), 4),
            cc, rng.randint(50_000, 5_000_000), STATES.get(cc),
        )
        entries.append(gold)
        golds.append(gold)
        if not unique_gold:
            for _ in range(rng.randint(0, 3)):
                other = rng.choice([c for c in COUNTRIES if c != cc])
                entries.append(entry(
                    new_id(), name, round(rng.uniform(-60, 70), 4),
                    round(rng.uniform(-179, 179), 4), other,
                    rng.randint(0, gold.population - 1), STATES.get(other),
                ))
    while len(entries) < n_entries:
        name = random_name(rng)
        if name in used_names:
            continue
        cc = rng.choice(COUNTRIES)
        entries.append(entry(
            new_id(), name, round(rng.uniform(-60, 70), 4), round(rng.uniform(-179, 179), 4),
            cc, rng.choice([0, rng.randint(1, 9_000_000)]), STATES.get(cc),
            code=rng.choice(["PPL", "ADM1", "PPLA", "HTL"]),
        ))
    gaz = Gazetteer(entries)
    return gaz, corpus_for(golds, rng)


def corpus_for(golds, rng, per_article=5) -> Corpus:
    articles, mentions = [], []
    for start in range(0, len(golds), per_article):
        chunk = golds[start : start + per_article]
        aid = f"art{start // per_article:03d}"
        body = ""
        spans = []
        for g in chunk:
            body += rng.choice(["Reports from ", "Officials in ", "Residents of "])
            spans.append((len(body), len(body) + len(g.name), g))
            body += g.name + rng.choice([" said on Monday. ", " were evacuated. ", " met. "])
        articles.append(Article(aid, body))
        for i, (s, e, g) in enumerate(spans):
            mentions.append(GoldMention(
                f"{aid}:{i:04d}", aid, g.name, s, e, GeoPoint(g.latitude, g.longitude),
                gold_geonames_id=g.id, gold_country=g.country_code, gold_population=g.population,
            ))
    return Corpus(articles, mentions)
