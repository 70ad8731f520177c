import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dvi.corpus import (
    CorpusManifest,
    DrawingEntry,
    ManifestError,
    PageRecord,
    QueryRecord,
    TocEntry,
    dumps_manifest,
    load_manifest,
    parse_manifest,
    parse_toc_text,
    save_manifest,
)

ID_PATTERN = r"PROJID(?:-[A-Z]+)+-\d{6}"


def _lines(*objs):
    return [json.dumps(o) for o in objs]


def test_load_three_pages(tmp_path):
    path = tmp_path / "bridge.jsonl"
    path.write_text("\n".join(_lines(
        {"kind": "page", "page_id": "p1", "page_no": 1, "text": "a", "text_source": "vector_pdf"},
        {"kind": "page", "page_id": "p2", "page_no": 2, "text": "b", "text_source": "ocr", "ocr_confidence": 0.7},
        {"kind": "page", "page_id": "p3", "page_no": 3},
        {"kind": "drawing", "number": "X-001", "title": "Plan", "page_id": "p2", "extra": "ignored"},
    )))
    m = load_manifest(path)
    assert m.corpus_id == "bridge"
    assert [p.page_id for p in m.pages] == ["p1", "p2", "p3"]
    assert m.drawing_count == 1
    assert m.page("p2").ocr_confidence == 0.7


def test_dangling_drawing_reference_names_the_id():
    with pytest.raises(ManifestError, match="p99"):
        parse_manifest(_lines(
            {"kind": "page", "page_id": "p1", "page_no": 1},
            {"kind": "drawing", "number": "X-001", "title": "Plan", "page_id": "p99"},
        ))


def test_empty_input_has_no_records():
    with pytest.raises(ManifestError, match="no records"):
        parse_manifest([])
    with pytest.raises(ManifestError, match="no records"):
        parse_manifest(["", "   "])


def test_parse_error_reports_line_number():
    with pytest.raises(ManifestError) as exc:
        parse_manifest(_lines({"kind": "page", "page_id": "p1", "page_no": 1}) + ["{not json"])
    assert exc.value.line == 2


def test_unknown_kind_rejected():
    with pytest.raises(ManifestError, match="unknown record kind"):
        parse_manifest(_lines({"kind": "sheet"}))


def test_duplicate_page_id():
    with pytest.raises(ManifestError, match="duplicate page_id"):
        parse_manifest(_lines({"kind": "page", "page_id": "p1", "page_no": 1},
                              {"kind": "page", "page_id": "p1", "page_no": 2}))


def test_page_invariants():
    with pytest.raises(ManifestError):
        PageRecord("p", 0)
    with pytest.raises(ManifestError):
        PageRecord("p", 1, "x", "ocr")  # confidence missing
    with pytest.raises(ManifestError):
        PageRecord("p", 1, "x", "vector_pdf", 0.9)
    with pytest.raises(ManifestError):
        PageRecord("p", 1, "x", "ocr", 1.5)


def test_toc_range_checked():
    pages = (PageRecord("p1", 1), PageRecord("p2", 2))
    with pytest.raises(ManifestError):
        TocEntry("X", 3, 2)
    with pytest.raises(ManifestError, match="outside"):
        CorpusManifest("c", pages, toc=(TocEntry("X", 1, 5),))


def test_query_gold_must_exist():
    with pytest.raises(ManifestError, match="p7"):
        CorpusManifest("c", (PageRecord("p1", 1),), queries=(QueryRecord("q1", "?", ("p7",)),))
    with pytest.raises(ManifestError):
        QueryRecord("q1", "?", ())


def test_titles_by_page_joins_multiple(tiny_manifest):
    m = CorpusManifest("c", (PageRecord("p1", 1),),
                       (DrawingEntry("A-1", "Plan", "p1"), DrawingEntry("A-2", "Elevation", "p1")))
    assert m.titles_by_page() == {"p1": "Plan Elevation"}


def test_round_trip(tmp_path, tiny_manifest, small_corpus):
    for m in (tiny_manifest, small_corpus):
        path = tmp_path / "m.jsonl"
        save_manifest(m, path)
        back = load_manifest(path)
        assert back == m
        assert dumps_manifest(back) == dumps_manifest(m)


_ident = st.text(alphabet="abcxyz019", min_size=1, max_size=6)


@st.composite
def manifests(draw):
    n = draw(st.integers(1, 6))
    pages = []
    for i in range(n):
        src = draw(st.sampled_from(["vector_pdf", "ocr", "none"]))
        conf = draw(st.floats(0, 1)) if src == "ocr" else None
        pages.append(PageRecord(f"p{i}", i + 1, draw(st.text(max_size=30)), src, conf,
                                draw(st.none() | _ident), draw(st.none() | _ident)))
    drawings = [DrawingEntry(draw(_ident), draw(st.text(max_size=20)), f"p{draw(st.integers(0, n - 1))}")
                for _ in range(draw(st.integers(0, 4)))]
    queries = [QueryRecord(f"q{j}", draw(st.text(max_size=20)), (f"p{draw(st.integers(0, n - 1))}",),
                           draw(st.text(max_size=10)))
               for j in range(draw(st.integers(0, 3)))]
    return CorpusManifest(draw(_ident), tuple(pages), tuple(drawings), (), tuple(queries))


@settings(max_examples=60, deadline=None)
@given(manifests())
def test_round_trip_property(m):
    assert parse_manifest(dumps_manifest(m).split("\n")) == m


# -- TOC parsing ----------------------------------------------------------------


def test_toc_line_with_long_identifier():
    res = parse_toc_text(["PROJID-GRP-PKG-ST-BR-DR-101013  Bridge-A General Arrangement"], ID_PATTERN)
    assert res.skipped == 0
    (e,) = res.entries
    assert e.drawing_number == "PROJID-GRP-PKG-ST-BR-DR-101013"
    assert e.title == "Bridge-A General Arrangement"


def test_toc_non_matching_lines_counted():
    res = parse_toc_text(["Revision History", "PROJID-ST-BR-DR-101013 Plan"], ID_PATTERN)
    assert res.skipped == 1
    assert [e.title for e in res.entries] == ["Plan"]


def test_toc_fixture_preserves_order_and_strips_leaders():
    # hand-parsed fixture
    lines = [
        "DRAWING LIST",
        "PROJID-ST-BR-DR-101013 .... Bridge-A General Arrangement ..... 3",
        "  PROJID-ST-BR-DR-501521 - Details: Pier-3 Reinforcement\t12",
        "PROJID-ST-ZZ-DR-100001   Post Tensioning Layout   14-15",
    ]
    res = parse_toc_text(lines, ID_PATTERN, {"PROJID-ST-BR-DR-501521": "p12"})
    assert [(e.drawing_number, e.title, e.page_id) for e in res.entries] == [
        ("PROJID-ST-BR-DR-101013", "Bridge-A General Arrangement", ""),
        ("PROJID-ST-BR-DR-501521", "Details: Pier-3 Reinforcement", "p12"),
        ("PROJID-ST-ZZ-DR-100001", "Post Tensioning Layout", ""),
    ]
    assert res.skipped == 1


def test_toc_title_keeps_trailing_digit_words():
    res = parse_toc_text(["PROJID-ST-101013 Bridge-A Pier-3"], ID_PATTERN)
    assert res.entries[0].title == "Bridge-A Pier-3"


def test_toc_bad_pattern_and_no_matches():
    with pytest.raises(ValueError, match="invalid"):
        parse_toc_text(["x"], "([")
    with pytest.raises(ValueError, match="no drawing numbers"):
        parse_toc_text(["Revision History"], ID_PATTERN)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.integers(0, 999999),
                          st.text(alphabet="ABCDEFG abc.-", max_size=25)), min_size=1, max_size=8))
def test_toc_titles_never_contain_numbers(rows):
    lines = [(f"PROJID-ST-{n:06d} {t}" if has else t) for has, n, t in rows]
    if not any(has for has, _, _ in rows):
        return
    res = parse_toc_text(lines, ID_PATTERN)
    assert len(res.entries) == sum(has for has, _, _ in rows)
    assert res.skipped == len(lines) - len(res.entries)
    import re
    for e in res.entries:
        assert re.search(ID_PATTERN, e.title) is None


def test_toc_dash_variants_stripped():
    res = parse_toc_text(["PROJID-ST-101013 \u2014 Deck Plan\t4\u20136"], ID_PATTERN)
    assert res.entries[0].title == "Deck Plan"
