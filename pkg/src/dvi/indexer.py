"""Per-page index documents for BM25.

Each page becomes one document with separate fields (drawing titles,
hierarchy labels, TOC categories, page text) that are searched as a single
concatenated string. Whether a page's own text joins its document is a
per-page decision driven by the text layer's provenance and OCR confidence.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .corpus import CorpusManifest, PageRecord
from .hdnc import HdncHierarchy
from .text import normalize_ws

BUNDLE_VERSION = 1
MODES = ("hdnc", "toc_only", "fulltext_only")
FUSION_MODES = ("always", "never", "adaptive")


class IndexBuildError(ValueError):
    pass


@dataclass(frozen=True)
class FusionPolicy:
    mode: str = "adaptive"
    ocr_confidence_threshold: float = 0.85

    def __post_init__(self) -> None:
        if self.mode not in FUSION_MODES:
            raise ValueError(f"unknown fusion mode {self.mode!r}")
        if not 0.0 <= self.ocr_confidence_threshold <= 1.0:
            raise ValueError("ocr_confidence_threshold must lie in [0, 1]")


@dataclass(frozen=True)
class IndexDocument:
    page_id: str
    page_no: int
    title_field: str = ""
    labels_field: str = ""
    text_field: str = ""
    toc_field: str = ""
    is_toc_page: bool = False

    def searchable_text(self) -> str:
        return "\n".join(f for f in (self.title_field, self.labels_field, self.toc_field, self.text_field) if f)


@dataclass
class IndexBundle:
    corpus_id: str
    policy: FusionPolicy
    mode: str
    documents: list[IndexDocument]
    hierarchy: HdncHierarchy | None = None
    build_stats: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "version": BUNDLE_VERSION,
            "corpus_id": self.corpus_id,
            "mode": self.mode,
            "policy": asdict(self.policy),
            "documents": [asdict(d) for d in self.documents],
            "hierarchy": self.hierarchy.to_dict() if self.hierarchy else None,
            "build_stats": dict(self.build_stats),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, indent=1) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def from_dict(cls, d: dict) -> "IndexBundle":
        if d.get("version") != BUNDLE_VERSION:
            raise IndexBuildError(f"unsupported index bundle version {d.get('version')!r}")
        return cls(
            corpus_id=d["corpus_id"],
            policy=FusionPolicy(**d["policy"]),
            mode=d["mode"],
            documents=[IndexDocument(**x) for x in d["documents"]],
            hierarchy=HdncHierarchy.from_dict(d["hierarchy"]) if d.get("hierarchy") else None,
            build_stats=dict(d.get("build_stats") or {}),
        )

    @classmethod
    def load(cls, path: str | Path) -> "IndexBundle":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def decide_fusion(page: PageRecord, policy: FusionPolicy) -> bool:
    if policy.mode == "always":
        return True
    if policy.mode == "never":
        return False
    if page.text_source == "vector_pdf":
        return True
    if page.text_source == "ocr":
        return page.ocr_confidence is not None and page.ocr_confidence >= policy.ocr_confidence_threshold
    return False


def detect_toc_pages(manifest: CorpusManifest) -> set[str]:
    """Pages whose text names at least half of the drawing numbers or TOC categories."""
    keys = [d.drawing_number.lower() for d in manifest.drawings]
    keys += [t.category.lower() for t in manifest.toc]
    keys = sorted(set(keys))
    if len(keys) < 2:
        return set()
    need = (len(keys) + 1) // 2
    found = set()
    for p in manifest.pages:
        if not p.text:
            continue
        low = normalize_ws(p.text.lower())
        if sum(k in low for k in keys) >= need:
            found.add(p.page_id)
    return found


def build_index(
    manifest: CorpusManifest,
    hierarchy: HdncHierarchy | None = None,
    policy: FusionPolicy = FusionPolicy(),
    mode: str = "hdnc",
    *,
    include_labels: bool = True,
    exclude_toc_page: bool = False,
) -> IndexBundle:
    """One document per page.

    ``include_labels=False`` keeps only drawing titles in hdnc mode (the
    title-only ablation). ``exclude_toc_page`` blanks detected contents
    pages so they can never be retrieved.
    """
    if mode not in MODES:
        raise IndexBuildError(f"unknown index mode {mode!r}")
    if mode == "hdnc" and hierarchy is None:
        raise IndexBuildError("hdnc mode requires a hierarchy")
    if mode == "toc_only" and not manifest.toc:
        raise IndexBuildError("toc_only mode requires TOC entries")

    titles: dict[str, list[str]] = {}
    for d in manifest.drawings:
        titles.setdefault(d.page_id, []).append(d.title)
    toc_pages = detect_toc_pages(manifest)

    docs = []
    fused = skipped = 0
    for page in sorted(manifest.pages, key=lambda p: p.page_no):
        is_toc = page.page_id in toc_pages
        if is_toc and exclude_toc_page:
            docs.append(IndexDocument(page.page_id, page.page_no, is_toc_page=True))
            skipped += 1
            continue
        title = labels = toc_field = ""
        if mode == "hdnc":
            title = normalize_ws(" ".join(titles.get(page.page_id, ())))
            if include_labels:
                labels = normalize_ws(" ".join(hierarchy.labels_by_page.get(page.page_id, ())))
        elif mode == "toc_only":
            toc_field = normalize_ws(" ".join(t.category for t in manifest.toc if t.covers(page.page_no)))
        text = ""
        if page.text and decide_fusion(page, policy):
            text = normalize_ws(page.text)
            fused += 1
        docs.append(IndexDocument(page.page_id, page.page_no, title, labels, text, toc_field, is_toc))

    stats = {
        "mode": mode,
        "fused_page_count": fused,
        "skipped_page_count": skipped,
        "page_count": len(docs),
        "toc_pages": sorted(toc_pages),
        "labels": include_labels if mode == "hdnc" else None,
    }
    return IndexBundle(manifest.corpus_id, policy, mode, docs, hierarchy, stats)
