import random
from collections import Counter
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dvi.corpus import dumps_manifest
from dvi.synth import (
    FACT_WEIGHTS,
    CatalogSpec,
    SynthSpec,
    SynthSpecError,
    garble,
    generate_synthetic_catalog,
    generate_synthetic_corpus,
    parse_text_mode,
    with_text_mode,
)


def test_default_spec_shape_and_determinism():
    a = generate_synthetic_corpus(SynthSpec(), 7)
    b = generate_synthetic_corpus(SynthSpec(), 7)
    assert a.drawing_count == 24
    assert dumps_manifest(a) == dumps_manifest(b)
    assert "PRJ-010104" in {d.drawing_number for d in a.drawings}
    assert all(len(d.drawing_number) == len("PRJ-") + 6 for d in a.drawings)


def test_different_seed_changes_content():
    assert dumps_manifest(generate_synthetic_corpus(SynthSpec(), 1)) != dumps_manifest(
        generate_synthetic_corpus(SynthSpec(), 2))


def test_garbled_corruption_rate():
    clean = generate_synthetic_corpus(SynthSpec(), 7)
    dirty = generate_synthetic_corpus(with_text_mode(SynthSpec(), "garbled(0.4)"), 7)
    diff = total = 0
    for c, d in zip(clean.pages, dirty.pages):
        assert len(c.text) == len(d.text)
        total += len(c.text)
        diff += sum(x != y for x, y in zip(c.text, d.text))
    assert total > 5000
    assert abs(diff / total - 0.4) <= 0.05
    assert {p.text_source for p in dirty.pages} == {"ocr"}
    assert all(p.ocr_confidence < 0.85 for p in dirty.pages)


def test_none_mode_has_no_text():
    m = generate_synthetic_corpus(with_text_mode(SynthSpec(), "none"), 3)
    assert all(p.text == "" and p.text_source == "none" for p in m.pages)


def test_unencodable_branches():
    with pytest.raises(SynthSpecError, match="cannot encode 11"):
        SynthSpec(widths=(1,), branches=(11,))


def test_full_width_uses_zero_code():
    m = generate_synthetic_corpus(SynthSpec(widths=(1,), branches=(10,), query_count=0), 0)
    assert sorted(d.drawing_number[-1] for d in m.drawings) == list("0123456789")


@pytest.mark.parametrize("bad", [
    {"widths": (2, 2), "branches": (3,)},
    {"text_mode": "garbled(1.5)"},
    {"text_mode": "smudged"},
    {"vocab": (("a b",), ("b c",)), "widths": (1, 1), "branches": (1, 1)},
    {"locating_fraction": 2.0},
])
def test_invalid_specs(bad):
    with pytest.raises(SynthSpecError):
        SynthSpec(**bad)


def test_from_dict_rejects_unknown_fields():
    assert SynthSpec.from_dict({"widths": [1, 2], "branches": [2, 3]}).widths == (1, 2)
    with pytest.raises(SynthSpecError, match="unknown"):
        SynthSpec.from_dict({"depth": 3})


def test_parse_text_mode():
    assert parse_text_mode("clean") == ("clean", 0.0)
    assert parse_text_mode("garbled(0.25)") == ("garbled", 0.25)


def test_garble_always_substitutes_a_different_char():
    text = "a" * 2000
    out = garble(text, 1.0, random.Random(0))
    assert "a" not in out and len(out) == len(text)
    assert garble(text, 0.0, random.Random(0)) == text


def test_titles_carry_path_words_and_queries_reference_gold():
    m = generate_synthetic_corpus(SynthSpec(query_count=50), 4)
    titles = m.titles_by_page()
    for q in m.queries:
        (gold,) = q.gold_page_ids
        assert gold in titles
        assert q.gold_answer
    located = sum(any(d.drawing_number in q.question for d in m.drawings) for q in m.queries)
    assert 0.6 <= located / len(m.queries) <= 1.0
    types = Counter(q.question_type for q in m.queries)
    assert types.most_common(1)[0][0] == "dimension"
    assert len(FACT_WEIGHTS) == 5


def test_toc_page_lists_every_drawing():
    m = generate_synthetic_corpus(SynthSpec(toc_page=True), 1)
    toc = m.page("p1")
    assert toc.page_no == 1 and toc.text.startswith("DRAWING LIST")
    assert all(d.drawing_number in toc.text for d in m.drawings)
    assert all(d.page_id != "p1" for d in m.drawings)


def test_catalog_structure():
    spec = CatalogSpec(query_count=30)
    m = generate_synthetic_catalog(spec, 0)
    assert len(m.toc) == len(spec.categories)
    assert m.page("p1").text.startswith("CONTENTS")
    for t in m.toc:
        for n in range(t.page_start, t.page_end + 1):
            assert m.page(f"p{n}").unit_id == t.category
    for q in m.queries:
        assert q.gold_unit_id in q.question
    assert dumps_manifest(m) == dumps_manifest(generate_synthetic_catalog(spec, 0))


def test_clean_catalog_categories_keep_text():
    m = generate_synthetic_catalog(CatalogSpec(categories=("joists", "bearing piles"),
                                               clean_categories=("joists",), query_count=0), 2)
    joists = [p for p in m.pages if p.unit_id == "joists"]
    assert all(p.text.startswith("JOISTS") and p.ocr_confidence >= 0.9 for p in joists)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 3), st.integers(1, 4)), min_size=1, max_size=3), st.integers(0, 50))
def test_generator_is_pure(levels, seed):
    spec = SynthSpec(widths=tuple(w for w, _ in levels), branches=tuple(b for _, b in levels), query_count=5)
    a = generate_synthetic_corpus(spec, seed)
    assert a == generate_synthetic_corpus(replace(spec), seed)
    n = 1
    for _, b in levels:
        n *= b
    assert a.drawing_count == n
    assert len({d.drawing_number for d in a.drawings}) == n


def test_question_text_never_points_at_two_pages():
    spec = SynthSpec(widths=(2, 2, 2), branches=(5, 4, 10), query_count=600, path_word_prob=0.5,
                     locating_fraction=0.3)
    m = generate_synthetic_corpus(spec, 1)
    gold_of = {}
    for q in m.queries:
        assert gold_of.setdefault(q.question, q.gold_page_ids) == q.gold_page_ids
