import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bm25_oracle import oracle_scores
from dvi.indexer import FusionPolicy, IndexBundle, IndexDocument
from dvi.retrieval import Bm25Params, build_postings, build_postings_from_texts, score_all, search
from dvi.text import tokenize

DOCS = [
    "Bridge-A General Arrangement",
    "Bridge-A Pier-3 Dimension Details pier details",
    "Post Tensioning Details",
    "Deck Slab Reinforcement Plan",
    "Pier Cap Elevation",
]


def _index(docs):
    return build_postings_from_texts([(f"d{i}", i + 1, t) for i, t in enumerate(docs)])


def test_five_doc_fixture_matches_oracle():
    ix = _index(DOCS)
    got = score_all("pier details", ix, Bm25Params())
    want = oracle_scores("pier details", DOCS)
    for i, w in enumerate(want):
        assert got.get(i, 0.0) == pytest.approx(w, abs=1e-9)
    hits = search("pier details", ix)
    assert [h.page_id for h in hits] == ["d1", "d2", "d4"]
    assert [h.rank for h in hits] == [1, 2, 3]


def test_planted_identifier_ranks_first():
    docs = DOCS + ["Sheet PRJ-501521 notes details"]
    hits = search("what is on PRJ-501521", _index(docs))
    assert hits[0].page_id == "d5"


def test_no_overlap_and_empty_query():
    ix = _index(DOCS)
    assert search("zzz qqq", ix) == []
    assert search("", ix) == []


def test_ties_broken_by_page_no():
    ix = build_postings_from_texts([("late", 9, "pier"), ("early", 2, "pier"), ("mid", 5, "pier")])
    assert [h.page_id for h in search("pier", ix)] == ["early", "mid", "late"]


def test_top_k_limits():
    ix = _index(DOCS)
    assert len(search("details pier bridge", ix, Bm25Params(top_k=1))) == 1
    assert len(search("details pier bridge deck", ix, Bm25Params(top_k=10))) == 5


def test_params_validated():
    for bad in ({"k1": -1}, {"b": 1.5}, {"top_k": 0}):
        with pytest.raises(ValueError):
            Bm25Params(**bad)


def test_shared_term_document_frequency():
    ix = _index(["pier a", "pier b", "pier c"])
    assert ix.vocabulary["pier"] == 3
    assert ix.idf("pier") > 0  # non-negative idf even for a term in every doc


def test_postings_from_bundle_match_counting_oracle():
    docs = [IndexDocument("p1", 1, "Pier Cap", "pier cap", ""),
            IndexDocument("p2", 2, "Deck", "", "deck slab deck"),
            IndexDocument("p3", 3)]
    bundle = IndexBundle("c", FusionPolicy(), "hdnc", docs)
    ix = build_postings(bundle)
    assert ix.doc_lengths == [4, 4, 0]  # title/label tokens counted; empty doc has length 0
    assert ix.avg_doc_length == pytest.approx(8 / 3)
    for ordinal, d in enumerate(docs):
        counts = Counter(tokenize(d.searchable_text()))
        for term, tf in counts.items():
            assert (ordinal, tf) in ix.postings[term]
    for term, plist in ix.postings.items():
        assert ix.vocabulary[term] == len(plist)


def test_empty_bundle_rejected():
    with pytest.raises(ValueError):
        build_postings(IndexBundle("c", FusionPolicy(), "hdnc", []))


WORDS = [f"w{i}" for i in range(40)] + ["pier-3", "a-1"]
doc_st = st.lists(st.sampled_from(WORDS), min_size=0, max_size=25).map(" ".join)


@settings(max_examples=60, deadline=None)
@given(st.lists(doc_st, min_size=1, max_size=20), st.lists(st.sampled_from(WORDS), min_size=1, max_size=5))
def test_oracle_equivalence_property(docs, qwords):
    query = " ".join(qwords)
    got = score_all(query, _index(docs), Bm25Params())
    for i, w in enumerate(oracle_scores(query, docs)):
        assert got.get(i, 0.0) == pytest.approx(w, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.lists(doc_st, min_size=1, max_size=15), st.sampled_from(WORDS), st.sampled_from(WORDS))
def test_duplicating_a_query_term_never_lowers_scores(docs, a, b):
    ix = _index(docs)
    base = score_all(f"{a} {b}", ix, Bm25Params())
    more = score_all(f"{a} {b} {a}", ix, Bm25Params())
    for o, s in base.items():
        assert more[o] >= s


@settings(max_examples=40, deadline=None)
@given(st.lists(doc_st, min_size=2, max_size=15), doc_st, st.sampled_from(WORDS))
def test_adding_a_document_keeps_tf_components(docs, extra, term):
    # with b = 0 the tf part of each score is independent of the collection, so a
    # new document can only rescale every existing score by the same idf factor
    p = Bm25Params(b=0.0)
    before = score_all(term, _index(docs), p)
    after = score_all(term, _index(docs + [extra]), p)
    ratios = {round(after[o] / s, 9) for o, s in before.items() if s > 0}
    assert len(ratios) <= 1


@settings(max_examples=30, deadline=None)
@given(st.lists(doc_st, min_size=1, max_size=15), st.lists(st.sampled_from(WORDS), min_size=1, max_size=4))
def test_search_is_deterministic_and_ordered(docs, qwords):
    ix = _index(docs)
    q = " ".join(qwords)
    a, b = search(q, ix), search(q, ix)
    assert a == b
    assert all(x.score >= y.score for x, y in zip(a, a[1:]))
    assert [h.rank for h in a] == list(range(1, len(a) + 1))
    assert all(h.score > 0 for h in a)


def test_random_corpora_against_oracle():
    rng = random.Random(11)
    for _ in range(10):
        docs = [" ".join(rng.choices(WORDS, k=rng.randint(0, 30))) for _ in range(rng.randint(1, 40))]
        q = " ".join(rng.choices(WORDS, k=3))
        got = score_all(q, _index(docs), Bm25Params(k1=1.2, b=0.5))
        for i, w in enumerate(oracle_scores(q, docs, 1.2, 0.5)):
            assert got.get(i, 0.0) == pytest.approx(w, abs=1e-9)
