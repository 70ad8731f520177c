import pytest

from dvi.corpus import CorpusManifest, DrawingEntry, PageRecord, QueryRecord, TocEntry
from dvi.synth import SynthSpec, generate_synthetic_corpus


@pytest.fixture
def tiny_manifest():
    pages = (
        PageRecord("p1", 1, "General notes for bridge works", "vector_pdf", image_ref="img1"),
        PageRecord("p2", 2, "Pier 3 elevation clear span length 24.5 m", "vector_pdf", unit_id="u1", image_ref="img2"),
        PageRecord("p3", 3, "garbled t3xt", "ocr", 0.4, unit_id="u1", image_ref="img3"),
    )
    drawings = (
        DrawingEntry("PRJ-101013", "Bridge-A General Arrangement", "p1"),
        DrawingEntry("PRJ-101014", "Bridge-A Pier-3 Dimension Details", "p2"),
        DrawingEntry("PRJ-501521", "Post Tensioning Details", "p3"),
    )
    toc = (TocEntry("GENERAL", 1, 1), TocEntry("DETAILS", 2, 3))
    queries = (
        QueryRecord("q1", "What is the clear span length on pier 3?", ("p2",), "24.5 m", "dimension", "u1"),
        QueryRecord("q2", "Which tendon profile is used?", ("p3",), "parabolic", "identification"),
    )
    return CorpusManifest("tiny", pages, drawings, toc, queries)


@pytest.fixture(scope="session")
def small_corpus():
    return generate_synthetic_corpus(SynthSpec(), 7)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
