"""Reference implementations of the hot loops.

Used when the compiled ``_speedups`` extension is unavailable. The
arithmetic is written in the same order as the Cython version so both
backends agree to the last few ulps.
"""

from __future__ import annotations

import heapq
import math
from typing import Sequence

BACKEND = "python"


def bm25_accumulate(
    postings: Sequence[tuple[Sequence[int], Sequence[int], float]],
    doc_lengths: Sequence[float],
    avg_doc_length: float,
    k1: float,
    b: float,
) -> tuple[list[int], list[float]]:
    """Sum BM25 contributions of several postings lists.

    ``postings`` holds one ``(doc_indices, term_frequencies, idf)`` triple
    per distinct query token; doc indices must be ascending. Returns the
    matched doc indices (ascending) and their scores.
    """
    acc: dict[int, float] = {}
    k1p1 = k1 + 1.0
    for docs, tfs, idf in postings:
        for j in range(len(docs)):
            d = docs[j]
            tf = float(tfs[j])
            norm = k1 * (1.0 - b + b * doc_lengths[d] / avg_doc_length)
            acc[d] = acc.get(d, 0.0) + idf * (tf * k1p1) / (tf + norm)
    order = sorted(acc)
    return order, [acc[d] for d in order]


def haversine_batch(
    lat1: Sequence[float],
    lon1: Sequence[float],
    lat2: Sequence[float],
    lon2: Sequence[float],
    radius: float,
) -> list[float]:
    n = len(lat1)
    if not (len(lon1) == len(lat2) == len(lon2) == n):
        raise ValueError("coordinate arrays must have equal length")
    out = [0.0] * n
    rad = math.pi / 180.0
    for i in range(n):
        p1 = lat1[i] * rad
        p2 = lat2[i] * rad
        dp = (lat2[i] - lat1[i]) * rad
        dl = (lon2[i] - lon1[i]) * rad
        s1 = math.sin(dp * 0.5)
        s2 = math.sin(dl * 0.5)
        a = s1 * s1 + math.cos(p1) * math.cos(p2) * s2 * s2
        if a > 1.0:
            a = 1.0
        out[i] = 2.0 * radius * math.asin(math.sqrt(a))
    return out


def bm25_topk(
    postings: Sequence[tuple[Sequence[int], Sequence[int], float]],
    doc_lengths: Sequence[float],
    avg_doc_length: float,
    k1: float,
    b: float,
    doc_country: Sequence[int],
    country: int,
    depth: int,
) -> tuple[list[int], list[float]]:
    """Best ``depth`` docs by (score desc, doc asc), optionally restricted to
    docs whose ``doc_country`` equals ``country`` (pass -1 for no filter)."""
    docs, scores = bm25_accumulate(postings, doc_lengths, avg_doc_length, k1, b)
    pairs = zip(docs, scores)
    if country >= 0:
        pairs = ((d, s) for d, s in pairs if doc_country[d] == country)
    best = heapq.nsmallest(depth, pairs, key=lambda p: (-p[1], p[0]))
    return [d for d, _ in best], [s for _, s in best]
