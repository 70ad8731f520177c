"""Corpus data model, manifest I/O and TOC-line parsing.

A manifest is a UTF-8 file of JSON objects, one per line, each carrying a
``kind`` of ``page``, ``drawing``, ``toc`` or ``query``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

TEXT_SOURCES = ("vector_pdf", "ocr", "none")
QUESTION_TYPES = ("dimension", "value", "identification", "specification", "count", "other")


class ManifestError(ValueError):
    """Raised for malformed or inconsistent manifests."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class PageRecord:
    page_id: str
    page_no: int
    text: str = ""
    text_source: str = "none"
    ocr_confidence: float | None = None
    unit_id: str | None = None
    image_ref: str | None = None

    def __post_init__(self) -> None:
        if self.page_no < 1:
            raise ManifestError(f"page {self.page_id!r}: page_no must be >= 1")
        if self.text_source not in TEXT_SOURCES:
            raise ManifestError(f"page {self.page_id!r}: unknown text_source {self.text_source!r}")
        if (self.ocr_confidence is not None) != (self.text_source == "ocr"):
            raise ManifestError(
                f"page {self.page_id!r}: ocr_confidence must be present iff text_source is ocr"
            )
        if self.ocr_confidence is not None and not 0.0 <= self.ocr_confidence <= 1.0:
            raise ManifestError(f"page {self.page_id!r}: ocr_confidence outside [0, 1]")


@dataclass(frozen=True)
class DrawingEntry:
    drawing_number: str
    title: str
    page_id: str

    def __post_init__(self) -> None:
        if not self.drawing_number:
            raise ManifestError("drawing_number must be non-empty")


@dataclass(frozen=True)
class TocEntry:
    category: str
    page_start: int
    page_end: int

    def __post_init__(self) -> None:
        if self.page_start > self.page_end:
            raise ManifestError(
                f"toc {self.category!r}: page_start {self.page_start} > page_end {self.page_end}"
            )

    def covers(self, page_no: int) -> bool:
        return self.page_start <= page_no <= self.page_end


@dataclass(frozen=True)
class QueryRecord:
    query_id: str
    question: str
    gold_page_ids: tuple[str, ...]
    gold_answer: str = ""
    question_type: str = "other"
    gold_unit_id: str | None = None

    def __post_init__(self) -> None:
        if not self.gold_page_ids:
            raise ManifestError(f"query {self.query_id!r}: gold_page_ids is empty")
        if self.question_type not in QUESTION_TYPES:
            raise ManifestError(
                f"query {self.query_id!r}: unknown question_type {self.question_type!r}"
            )


@dataclass(frozen=True)
class CorpusManifest:
    corpus_id: str
    pages: tuple[PageRecord, ...]
    drawings: tuple[DrawingEntry, ...] = ()
    toc: tuple[TocEntry, ...] = ()
    queries: tuple[QueryRecord, ...] = ()
    _by_id: dict[str, PageRecord] = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        by_id: dict[str, PageRecord] = {}
        for p in self.pages:
            if p.page_id in by_id:
                raise ManifestError(f"duplicate page_id {p.page_id!r}")
            by_id[p.page_id] = p
        object.__setattr__(self, "_by_id", by_id)
        for d in self.drawings:
            if d.page_id not in by_id:
                raise ManifestError(f"drawing {d.drawing_number!r} references unknown page_id {d.page_id!r}")
        if self.pages:
            lo = min(p.page_no for p in self.pages)
            hi = max(p.page_no for p in self.pages)
            for t in self.toc:
                if t.page_start < lo or t.page_end > hi:
                    raise ManifestError(
                        f"toc {t.category!r}: range {t.page_start}-{t.page_end} outside pages {lo}-{hi}"
                    )
        elif self.toc:
            raise ManifestError("toc entries present but corpus has no pages")
        seen_q: set[str] = set()
        for q in self.queries:
            if q.query_id in seen_q:
                raise ManifestError(f"duplicate query_id {q.query_id!r}")
            seen_q.add(q.query_id)
            for pid in q.gold_page_ids:
                if pid not in by_id:
                    raise ManifestError(f"query {q.query_id!r} references unknown page_id {pid!r}")

    @property
    def drawing_count(self) -> int:
        return len(self.drawings)

    def page(self, page_id: str) -> PageRecord:
        return self._by_id[page_id]

    def has_page(self, page_id: str) -> bool:
        return page_id in self._by_id

    def query(self, query_id: str) -> QueryRecord:
        for q in self.queries:
            if q.query_id == query_id:
                return q
        raise KeyError(query_id)

    def titles_by_page(self) -> dict[str, str]:
        """Drawing titles per page; pages holding several drawings get them joined."""
        out: dict[str, list[str]] = {}
        for d in self.drawings:
            out.setdefault(d.page_id, []).append(d.title)
        return {pid: " ".join(ts) for pid, ts in out.items()}


# -- manifest I/O -------------------------------------------------------------


def _require(obj: dict, key: str, lineno: int):
    if key not in obj:
        raise ManifestError(f"{obj.get('kind')} record missing field {key!r}", lineno)
    return obj[key]


def _record_from_json(obj: dict, lineno: int):
    kind = obj.get("kind")
    try:
        if kind == "page":
            conf = obj.get("ocr_confidence")
            return PageRecord(
                page_id=str(_require(obj, "page_id", lineno)),
                page_no=int(_require(obj, "page_no", lineno)),
                text=obj.get("text") or "",
                text_source=obj.get("text_source") or "none",
                ocr_confidence=None if conf is None else float(conf),
                unit_id=obj.get("unit_id"),
                image_ref=obj.get("image_ref"),
            )
        if kind == "drawing":
            return DrawingEntry(
                drawing_number=str(_require(obj, "number", lineno)),
                title=str(obj.get("title") or ""),
                page_id=str(_require(obj, "page_id", lineno)),
            )
        if kind == "toc":
            return TocEntry(
                category=str(_require(obj, "category", lineno)),
                page_start=int(_require(obj, "page_start", lineno)),
                page_end=int(_require(obj, "page_end", lineno)),
            )
        if kind == "query":
            return QueryRecord(
                query_id=str(_require(obj, "query_id", lineno)),
                question=str(_require(obj, "question", lineno)),
                gold_page_ids=tuple(str(p) for p in _require(obj, "gold_page_ids", lineno)),
                gold_answer=str(obj.get("gold_answer") or ""),
                question_type=obj.get("question_type") or "other",
                gold_unit_id=obj.get("gold_unit_id"),
            )
    except ManifestError as exc:
        if exc.line is None:
            raise ManifestError(str(exc), lineno) from None
        raise
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"bad {kind} record: {exc}", lineno) from None
    raise ManifestError(f"unknown record kind {kind!r}", lineno)


def parse_manifest(lines: Iterable[str], corpus_id: str = "corpus") -> CorpusManifest:
    pages, drawings, toc, queries = [], [], [], []
    buckets = {PageRecord: pages, DrawingEntry: drawings, TocEntry: toc, QueryRecord: queries}
    n = 0
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"invalid JSON: {exc.msg}", lineno) from None
        if not isinstance(obj, dict):
            raise ManifestError("record is not an object", lineno)
        if obj.get("kind") == "corpus":
            corpus_id = str(obj.get("corpus_id") or corpus_id)
            continue
        rec = _record_from_json(obj, lineno)
        buckets[type(rec)].append(rec)
        n += 1
    if n == 0:
        raise ManifestError("no records")
    return CorpusManifest(corpus_id, tuple(pages), tuple(drawings), tuple(toc), tuple(queries))


def load_manifest(path: str | Path) -> CorpusManifest:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        return parse_manifest(fh, corpus_id=path.stem)


def manifest_records(manifest: CorpusManifest) -> list[dict]:
    recs: list[dict] = [{"kind": "corpus", "corpus_id": manifest.corpus_id}]
    for p in manifest.pages:
        recs.append({
            "kind": "page", "page_id": p.page_id, "page_no": p.page_no, "text": p.text,
            "text_source": p.text_source, "ocr_confidence": p.ocr_confidence,
            "unit_id": p.unit_id, "image_ref": p.image_ref,
        })
    for d in manifest.drawings:
        recs.append({"kind": "drawing", "number": d.drawing_number, "title": d.title, "page_id": d.page_id})
    for t in manifest.toc:
        recs.append({"kind": "toc", "category": t.category, "page_start": t.page_start, "page_end": t.page_end})
    for q in manifest.queries:
        recs.append({
            "kind": "query", "query_id": q.query_id, "question": q.question,
            "gold_page_ids": list(q.gold_page_ids), "gold_unit_id": q.gold_unit_id,
            "question_type": q.question_type, "gold_answer": q.gold_answer,
        })
    return recs


def dumps_manifest(manifest: CorpusManifest) -> str:
    return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in manifest_records(manifest))


def save_manifest(manifest: CorpusManifest, path: str | Path) -> None:
    Path(path).write_text(dumps_manifest(manifest), encoding="utf-8")


# -- TOC parsing --------------------------------------------------------------

_EDGE_JUNK = re.compile("^[\\s.\\-\u2013\u2014:|]+|[\\s.\\-\u2013\u2014:|]+$")
# Page number after a dot leader, a tab or a wide gap: "Pier Details ..... 12".
_TRAILING_PAGE = re.compile(r"(?:\.{2,}|\t|\s{2,})[\s.]*\d{1,4}(?:\s*[-\u2013]\s*\d{1,4})?$")


@dataclass
class TocParseResult:
    entries: list[DrawingEntry]
    skipped: int


def _clean_title(text: str) -> str:
    text = _TRAILING_PAGE.sub("", text.rstrip())
    text = _EDGE_JUNK.sub("", text)
    return " ".join(text.split())


def parse_toc_text(
    lines: list[str], number_pattern: str, page_id_for: dict[str, str] | None = None
) -> TocParseResult:
    """Extract one drawing entry per line carrying a drawing number.

    The title is what remains after removing the first match, leader dots,
    dashes and a trailing page number. ``page_id_for`` maps drawing numbers
    to pages; unmapped entries get an empty page_id for the caller to fill.
    """
    try:
        rx = re.compile(number_pattern)
    except re.error as exc:
        raise ValueError(f"invalid drawing number pattern: {exc}") from None
    entries: list[DrawingEntry] = []
    skipped = 0
    for line in lines:
        m = rx.search(line)
        if m is None or not m.group():
            skipped += 1
            continue
        number = m.group()
        rest = line[: m.start()] + " " + line[m.end():]
        rest = rx.sub(" ", rest)
        entries.append(DrawingEntry(number, _clean_title(rest), (page_id_for or {}).get(number, "")))
    if not entries:
        raise ValueError("no drawing numbers matched; wrong pattern or no TOC")
    return TocParseResult(entries, skipped)
