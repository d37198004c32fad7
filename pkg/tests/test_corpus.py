import json
import random

import pytest

from helpers import corpus_for, entry
from newsgeo.corpus import (
    Article,
    Corpus,
    CorpusError,
    GoldMention,
    load_normalized,
    parse_geovirus,
    parse_geowebnews,
    parse_lgl,
    write_normalized,
)
from newsgeo.gazetteer import Gazetteer
from newsgeo.metrics import GeoPoint

GWN = """<?xml version="1.0" encoding="utf-8"?>
<articles>
<article id="1">
<text>Flooding hit London and Paris. Brussels said no. The France team won.</text>
<toponyms>
<toponym><start>13</start><end>19</end><phrase>London</phrase><type>Literal</type>
  <gaztag geonameid="2643743"><lat>51.50853</lat><lon>-0.12574</lon></gaztag></toponym>
<toponym><start>24</start><end>29</end><phrase>Paris</phrase><type>Literal_Modifier</type>
  <gaztag geonameid="2988507"><lat>48.85341</lat><lon>2.3488</lon></gaztag></toponym>
<toponym><start>31</start><end>39</end><phrase>Brussels</phrase><type>Metonymic</type>
  <gaztag geonameid="2800866"><lat>50.85045</lat><lon>4.34878</lon></gaztag></toponym>
<toponym><start>53</start><end>59</end><phrase>France</phrase><type>Demonym</type></toponym>
</toponyms>
</article>
</articles>
"""

LGL = """<articles>
<article docid="38765">
<url>http://example.invalid</url>
<text>Police in Paris, Texas and Paris arrested two.</text>
<toponyms>
<toponym><start>10</start><end>15</end><phrase>Paris</phrase>
  <gaztag geonameid="4717560"><name>Paris</name><fclass>P</fclass><lat>33.66</lat><lon>-95.55</lon><country>US</country></gaztag></toponym>
<toponym><start>17</start><end>22</end><phrase>Texas</phrase></toponym>
<toponym><start>25</start><end>30</end><phrase>Paris</phrase>
  <gaztag geonameid="2988507"><lat>48.85</lat><lon>2.35</lon></gaztag></toponym>
</toponyms>
</article>
</articles>
"""

GEOVIRUS = """<articles>
<article>
<source>http://example.invalid/a</source>
<text>Outbreak in Cairo spreads; Cairo officials and Africa respond.</text>
<locations>
<location><name>Cairo</name><start>12</start><end>17</end><lat>30.06</lat><lon>31.25</lon><page>Cairo</page></location>
<location><name>Cairo</name><start>12</start><end>17</end><lat>30.06</lat><lon>31.25</lon></location>
<location><name>Cairo</name><start>28</start><end>33</end><lat>30.06</lat><lon>31.25</lon></location>
<location><name>Africa</name><start>47</start><end>53</end><lat>2.0</lat><lon>16.0</lon></location>
</locations>
</article>
</articles>
"""


@pytest.fixture
def gaz():
    return Gazetteer([
        entry(2643743, "London", 51.5, -0.12, "GB", 8961989),
        entry(2988507, "Paris", 48.85, 2.35, "FR", 2138551),
        entry(4717560, "Paris", 33.66, -95.55, "US", 24782),
    ])


def test_geowebnews_type_filter(tmp_path, gaz):
    p = tmp_path / "gwn.xml"
    p.write_text(GWN, encoding="utf-8")
    c = parse_geowebnews(p, gaz)
    assert [m.surface for m in c.mentions] == ["London", "Paris"]
    assert c.mentions[0].gold_country == "GB"
    assert c.mentions[0].gold_population == 8961989
    assert parse_geowebnews(p, gaz) == c


def test_lgl_drops_uncoordinated(tmp_path, gaz):
    p = tmp_path / "lgl.xml"
    p.write_text(LGL, encoding="utf-8")
    c = parse_lgl(p, gaz)
    assert [m.surface for m in c.mentions] == ["Paris", "Paris"]
    assert [m.gold_country for m in c.mentions] == ["US", "FR"]
    assert c.articles[0].article_id == "lgl-38765"
    # offset 25..30 is shifted by the misaligned annotation and gets repaired
    body = c.articles[0].body
    assert all(body[m.char_start:m.char_end] == m.surface for m in c.mentions)


def test_geovirus_keeps_everything_and_uses_sidecar(tmp_path):
    p = tmp_path / "gv.xml"
    p.write_text(GEOVIRUS, encoding="utf-8")
    side = tmp_path / "countries.json"
    side.write_text(json.dumps({"geovirus-00001:0000": "eg", "geovirus-00001:0002": "EG"}))
    c = parse_geovirus(p, side)
    assert len(c.mentions) == 4
    assert (c.mentions[0].char_start, c.mentions[1].char_start) == (12, 12)
    assert [m.gold_country for m in c.mentions] == ["EG", None, "EG", None]
    assert all(m.gold_population is None for m in c.mentions)


def test_missing_dataset_is_fatal(tmp_path):
    with pytest.raises(FileNotFoundError):
        parse_lgl(tmp_path / "nope.xml")
    with pytest.raises(FileNotFoundError):
        parse_lgl(tmp_path)


def test_normalized_roundtrip(tmp_path):
    golds = [entry(i, n, i, i, "AU", i * 10) for i, n in enumerate(["Ōtautahi", "Perth", "Hobart"], 1)]
    c = corpus_for(golds, random.Random(0), per_article=2)
    c.dataset = "unit"
    p = tmp_path / "c.json"
    write_normalized(c, p)
    assert load_normalized(p) == c
    write_normalized(load_normalized(p), tmp_path / "c2.json")
    assert (tmp_path / "c2.json").read_bytes() == p.read_bytes()


def test_empty_file_is_empty_corpus(tmp_path):
    p = tmp_path / "e.json"
    p.write_text("")
    assert load_normalized(p) == Corpus()


def test_bad_offsets_and_schema(tmp_path):
    bad = {"schema_version": 1, "articles": [{"article_id": "a", "body": "Perth"}],
           "mentions": [{"mention_id": "a:0", "article_id": "a", "surface": "Perth",
                         "char_start": 0, "char_end": 9, "latitude": 0, "longitude": 0}]}
    p = tmp_path / "b.json"
    p.write_text(json.dumps(bad))
    with pytest.raises(CorpusError, match="offsets"):
        load_normalized(p)
    bad["schema_version"] = 2
    p.write_text(json.dumps(bad))
    with pytest.raises(CorpusError, match="schema_version"):
        load_normalized(p)


def test_invariants_enforced():
    a = Article("a", "Perth is hot")
    with pytest.raises(CorpusError, match="surface"):
        Corpus([a], [GoldMention("a:0", "a", "Hobart", 0, 5, GeoPoint(0, 0))])
    with pytest.raises(CorpusError, match="unknown article"):
        Corpus([a], [GoldMention("b:0", "b", "Perth", 0, 5, GeoPoint(0, 0))])
    with pytest.raises(CorpusError):
        Article("x", "")
