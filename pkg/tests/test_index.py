import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from helpers import brute_bm25, entry, random_name
from newsgeo.gazetteer import Gazetteer
from newsgeo.index import (
    B,
    K1,
    SNAPSHOT_MAGIC,
    ScoredMatch,
    SnapshotError,
    bm25_score,
    build_index,
    load_index,
    rerank_by_population,
    save_index,
    search,
    tokenize,
    top_by_score,
)


@pytest.mark.parametrize("text, tokens", [
    ("Newcastle upon Tyne", ["newcastle", "upon", "tyne"]),
    ("São Paulo", ["sao", "paulo"]),
    ("", []),
    ("Zürich-Flughafen", ["zurich", "flughafen"]),
    ("St. John's", ["st", "john", "s"]),
])
def test_tokenize(text, tokens):
    assert tokenize(text) == tokens


def three_docs():
    return Gazetteer([
        entry(1, "Newcastle"),
        entry(2, "Newcastle upon Tyne"),
        entry(3, "Melbourne"),
    ])


def test_build_stats():
    idx = build_index(Gazetteer([entry(1, "Paris")]))
    assert idx.doc_count == 1 and idx.avg_doc_length == 1
    idx = build_index(three_docs())
    assert idx.avg_doc_length == pytest.approx(5 / 3)
    assert idx.doc_lengths == {1: 1, 2: 3, 3: 1}


def test_abbreviations_indexed():
    idx = build_index(Gazetteer([entry(9, "Newcastle", abbrs=["NCL"])]))
    assert idx.postings["newcastle"] == [(9, 1)]
    assert idx.postings["ncl"] == [(9, 1)]


def test_empty_gazetteer_rejected():
    with pytest.raises(ValueError):
        build_index(Gazetteer())


def test_bm25_worked_example():
    idx = build_index(three_docs())
    q = tokenize("newcastle")
    # hand values from the formula, reproduced by brute_bm25
    assert bm25_score(q, 1, idx) == pytest.approx(0.561960861054684, abs=1e-12)
    assert bm25_score(q, 2, idx) == pytest.approx(0.3541123234043214, abs=1e-12)
    assert bm25_score(q, 3, idx) == 0
    assert round(bm25_score(q, 1, idx), 4) == 0.5620
    assert round(bm25_score(q, 2, idx), 4) == 0.3541


def test_bm25_empty_query_and_single_doc():
    idx = build_index(three_docs())
    assert all(bm25_score([], d, idx) == 0 for d in (1, 2, 3))
    one = build_index(Gazetteer([entry(1, "Paris")]))
    # N=1, df=1: idf = ln(1 + (1 - 1 + 0.5) / (1 + 0.5)) = ln(4/3); tf=len=avglen=1
    expected = math.log(4 / 3) * (K1 + 1) / (1 + K1)
    assert bm25_score(["paris"], 1, one) == pytest.approx(expected, abs=1e-15)


def test_bm25_unknown_id():
    with pytest.raises(KeyError):
        bm25_score(["x"], 77, build_index(three_docs()))


def test_country_filter_and_fallback(newcastles):
    _, idx = newcastles
    gb = search(idx, "Newcastle", "GB")
    assert [m.entry_id for m in gb] == [2641673]
    assert {m.entry_id for m in search(idx, "Newcastle", "ZZ")} == {2155472, 2641673}
    assert search(idx, "Newcastle", "gb") == gb


def test_ties_by_ascending_id():
    idx = build_index(Gazetteer([entry(30, "Springfield"), entry(10, "Springfield"),
                                 entry(20, "Springfield")]))
    assert [m.entry_id for m in search(idx, "springfield")] == [10, 20, 30]


def test_depth():
    idx = build_index(Gazetteer([entry(i, "Rome") for i in range(1, 8)]))
    assert len(search(idx, "rome", depth=3)) == 3
    with pytest.raises(ValueError):
        search(idx, "rome", depth=0)


def test_rerank_by_population():
    gaz = Gazetteer([entry(1, "a", pop=100), entry(2, "a", pop=5000), entry(3, "a", pop=300)])
    ms = [ScoredMatch(i, 1.0, gaz.get(i).population) for i in (1, 2, 3)]
    out = rerank_by_population(ms, 2, gaz)
    assert [c.entry.population for c in out] == [5000, 300]
    assert [c.rank for c in out] == [1, 2]


def test_rerank_keeps_all_when_fewer_than_k():
    gaz = Gazetteer([entry(i, "a", pop=i) for i in range(1, 8)])
    ms = [ScoredMatch(i, 1.0, i) for i in range(1, 8)]
    assert [c.rank for c in rerank_by_population(ms, 20, gaz)] == list(range(1, 8))
    assert rerank_by_population([], 20, gaz) == []


def test_rerank_population_tie_uses_score():
    gaz = Gazetteer([entry(1, "a", pop=1000), entry(2, "a", pop=1000)])
    ms = [ScoredMatch(1, 1.0, 1000), ScoredMatch(2, 2.0, 1000)]
    assert [c.entry.id for c in rerank_by_population(ms, 2, gaz)] == [2, 1]


def test_top_by_score_ignores_population():
    gaz = Gazetteer([entry(1, "a", pop=10**6), entry(2, "a", pop=1)])
    ms = [ScoredMatch(1, 1.0, 10**6), ScoredMatch(2, 2.0, 1)]
    assert [c.entry.id for c in top_by_score(ms, 5, gaz)] == [2, 1]


def random_gazetteer(rng, n):
    ids = rng.sample(range(1, 10_000), n)
    return Gazetteer([
        entry(i, random_name(rng), cc=rng.choice(["AU", "GB", "US"]), pop=rng.randint(0, 10**6),
              alts=[random_name(rng)] if rng.random() < 0.3 else [])
        for i in ids
    ])


def test_index_matches_brute_force_ordering():
    rng = random.Random(11)
    for _ in range(20):
        gaz = random_gazetteer(rng, rng.randint(1, 50))
        idx = build_index(gaz)
        docs = {e.id: [t for n in e.searchable_names for t in tokenize(n)] for e in gaz}
        query = random_name(rng)
        oracle = brute_bm25(docs, tokenize(query))
        got = search(idx, query, depth=100)
        want = sorted(oracle.items(), key=lambda kv: (-kv[1], kv[0]))
        assert [m.entry_id for m in got] == [k for k, _ in want]
        for m, (_, s) in zip(got, want):
            assert abs(m.score - s) <= 1e-9


def test_index_invariants(world):
    gaz, idx, _ = world
    assert sum(idx.doc_lengths.values()) / idx.doc_count == pytest.approx(idx.avg_doc_length)
    for tok, plist in idx.postings.items():
        ids = [eid for eid, _ in plist]
        assert ids == sorted(ids)
        assert all(eid in gaz for eid in ids)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([None, "AU", "GB", "US", "ZZ"]))
def test_search_properties(seed, country):
    rng = random.Random(seed)
    gaz = random_gazetteer(rng, rng.randint(1, 30))
    idx = build_index(gaz)
    q = random_name(rng, (1, 2))
    first = search(idx, q, country)
    assert search(idx, q, country) == first
    if search(idx, q):
        assert first
    pops = [c.entry.population for c in rerank_by_population(first, 20, gaz)]
    assert pops == sorted(pops, reverse=True)


def test_snapshot_roundtrip(tmp_path, newcastles):
    gaz, idx = newcastles
    p = tmp_path / "idx.bin"
    save_index(idx, p)
    back = load_index(p)
    assert back.postings == idx.postings
    assert back.doc_lengths == idx.doc_lengths
    assert search(back, "Newcastle") == search(idx, "Newcastle")
    assert [e.to_dict() for e in back.source] == [e.to_dict() for e in gaz]


def test_snapshot_version_mismatch(tmp_path, newcastles):
    p = tmp_path / "idx.bin"
    save_index(newcastles[1], p)
    raw = bytearray(p.read_bytes())
    raw[len(SNAPSHOT_MAGIC)] = 99
    p.write_bytes(bytes(raw))
    with pytest.raises(SnapshotError, match="format 99"):
        load_index(p)
    p.write_bytes(b"garbage!garbage")
    with pytest.raises(SnapshotError, match="not an index"):
        load_index(p)
