"""Okapi BM25 over index documents."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import TYPE_CHECKING

from .text import tokenize

if TYPE_CHECKING:
    from .indexer import IndexBundle


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.5
    b: float = 0.75
    top_k: int = 3

    def __post_init__(self) -> None:
        if self.k1 < 0:
            raise ValueError("k1 must be >= 0")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must lie in [0, 1]")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")


@dataclass(frozen=True)
class SearchHit:
    page_id: str
    score: float
    rank: int


@dataclass
class PostingsIndex:
    vocabulary: dict[str, int]
    postings: dict[str, list[tuple[int, int]]]
    doc_lengths: list[int]
    avg_doc_length: float
    doc_ids: list[str]
    page_nos: list[int]

    @property
    def n_docs(self) -> int:
        return len(self.doc_ids)

    def idf(self, term: str) -> float:
        df = self.vocabulary.get(term, 0)
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))


def build_postings_from_texts(texts: list[tuple[str, int, str]]) -> PostingsIndex:
    """``texts`` holds (page_id, page_no, searchable text) per document."""
    postings: dict[str, list[tuple[int, int]]] = {}
    lengths = []
    for ordinal, (_, _, text) in enumerate(texts):
        toks = tokenize(text)
        lengths.append(len(toks))
        for term, tf in Counter(toks).items():
            postings.setdefault(term, []).append((ordinal, tf))
    vocab = {t: len(p) for t, p in postings.items()}
    avg = sum(lengths) / len(lengths) if lengths else 0.0
    return PostingsIndex(
        vocabulary=vocab,
        postings=postings,
        doc_lengths=lengths,
        avg_doc_length=avg,
        doc_ids=[t[0] for t in texts],
        page_nos=[t[1] for t in texts],
    )


def build_postings(bundle: "IndexBundle") -> PostingsIndex:
    if not bundle.documents:
        raise ValueError("index bundle has no documents")
    return build_postings_from_texts([(d.page_id, d.page_no, d.searchable_text()) for d in bundle.documents])


def score_all(query: str, index: PostingsIndex, params: Bm25Params) -> dict[int, float]:
    """BM25 score per document ordinal, for documents matching at least one query term."""
    k1, b = params.k1, params.b
    avgdl = index.avg_doc_length or 1.0
    scores: dict[int, float] = {}
    for term in tokenize(query):
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for ordinal, tf in plist:
            norm = k1 * (1.0 - b + b * index.doc_lengths[ordinal] / avgdl)
            scores[ordinal] = scores.get(ordinal, 0.0) + idf * tf * (k1 + 1.0) / (tf + norm)
    return scores


def search(query: str, index: PostingsIndex, params: Bm25Params = Bm25Params()) -> list[SearchHit]:
    scores = score_all(query, index, params)
    ranked = sorted(
        ((s, o) for o, s in scores.items() if s > 0.0),
        key=lambda so: (-so[0], index.page_nos[so[1]], so[1]),
    )
    return [
        SearchHit(index.doc_ids[o], s, rank)
        for rank, (s, o) in enumerate(ranked[: params.top_k], start=1)
    ]
