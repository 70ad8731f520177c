"""Retrieval and end-to-end QA metrics, plus head-to-head comparison."""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

from .corpus import QUESTION_TYPES, CorpusManifest
from .text import STOPWORDS, tokenize

NUMERIC_TOLERANCE = 0.01

# thousands-separated or plain integer part, optional decimals
_NUMBER = re.compile(r"(?<![\w.])(\d{1,3}(?:,\d{3})+|\d+)(\.\d+)?")


@dataclass
class RetrievalMetrics:
    page_r_at: dict[int, float]
    mrr: float
    query_count: int
    img_r_at: dict[int, float] | None = None
    unit_r_at: dict[int, float] | None = None


@dataclass
class QaMetrics:
    accuracy: float
    conversion_rate: float
    query_count: int
    hit_count: int
    by_type: dict[str, dict] = field(default_factory=dict)


@dataclass
class HeadToHead:
    both_correct: int = 0
    only_a: int = 0
    only_b: int = 0
    both_wrong: int = 0

    @property
    def total(self) -> int:
        return self.both_correct + self.only_a + self.only_b + self.both_wrong


def _first_rank(ranked: Sequence[str], gold: set[str]) -> int | None:
    for i, pid in enumerate(ranked, start=1):
        if pid in gold:
            return i
    return None


def retrieval_metrics(
    results: Mapping[str, Sequence[str]], manifest: CorpusManifest, ks: Sequence[int] = (1, 3)
) -> RetrievalMetrics:
    """PageR@k and MRR over the queries in ``results`` (query_id -> ranked page ids)."""
    queries = {q.query_id: q for q in manifest.queries}
    unknown = [qid for qid in results if qid not in queries]
    if unknown:
        raise KeyError(f"unknown query_id(s): {unknown[:5]}")
    ks = sorted(set(ks))
    n = len(results)
    page_hits = {k: 0 for k in ks}
    rr = 0.0

    image_of = {p.page_id: p.image_ref for p in manifest.pages}
    unit_of = {p.page_id: p.unit_id for p in manifest.pages}
    has_images = any(p.image_ref for p in manifest.pages)
    img_hits = {k: 0 for k in ks}
    unit_hits = {k: 0 for k in ks}
    unit_n = 0

    for qid, ranked in results.items():
        q = queries[qid]
        gold = set(q.gold_page_ids)
        r = _first_rank(ranked, gold)
        if r is not None:
            rr += 1.0 / r
        gold_imgs = {image_of[g] for g in gold if image_of.get(g)}
        if q.gold_unit_id is not None:
            unit_n += 1
        for k in ks:
            top = list(ranked[:k])
            if r is not None and r <= k:
                page_hits[k] += 1
            if gold_imgs and gold_imgs & {image_of.get(p) for p in top}:
                img_hits[k] += 1
            if q.gold_unit_id is not None and q.gold_unit_id in {unit_of.get(p) for p in top}:
                unit_hits[k] += 1

    def frac(hits: dict[int, int], denom: int) -> dict[int, float]:
        return {k: (hits[k] / denom if denom else 0.0) for k in ks}

    return RetrievalMetrics(
        page_r_at=frac(page_hits, n),
        mrr=rr / n if n else 0.0,
        query_count=n,
        img_r_at=frac(img_hits, n) if has_images else None,
        unit_r_at=frac(unit_hits, unit_n) if unit_n else None,
    )


def extract_number(text: str) -> float | None:
    m = _NUMBER.search(text)
    if m is None:
        return None
    return float(m.group(1).replace(",", "") + (m.group(2) or ""))


def _keywords(text: str) -> set[str]:
    return {t for t in tokenize(text) if t not in STOPWORDS}


def match_answer(predicted: str, gold: str, question_type: str | None = None) -> bool:
    """Numeric match within 1% when both sides carry a number, else all gold keywords present.

    ``question_type`` is accepted for interface symmetry; the rule is the
    same for every type.
    """
    p, g = extract_number(predicted), extract_number(gold)
    if p is not None and g is not None:
        if g == 0:
            return p == 0
        return abs(p - g) <= NUMERIC_TOLERANCE * abs(g) + 1e-12
    kw = _keywords(gold)
    if not kw:
        return False
    return kw <= set(tokenize(predicted))


def qa_metrics(
    answers: Mapping[str, str],
    retrieval_results: Mapping[str, Sequence[str]],
    manifest: CorpusManifest,
    k: int = 3,
) -> QaMetrics:
    """Accuracy over the queries in ``retrieval_results``; a missing answer counts as wrong."""
    queries = {q.query_id: q for q in manifest.queries}
    by_type: dict[str, list[int]] = {}
    correct = hits = hit_correct = 0
    for qid, ranked in retrieval_results.items():
        q = queries[qid]
        ok = match_answer(answers.get(qid, ""), q.gold_answer, q.question_type)
        hit = bool(set(ranked[:k]) & set(q.gold_page_ids))
        correct += ok
        hits += hit
        hit_correct += ok and hit
        c = by_type.setdefault(q.question_type, [0, 0])
        c[0] += 1
        c[1] += ok
    n = len(retrieval_results)
    ordered = {t: by_type[t] for t in QUESTION_TYPES if t in by_type}
    return QaMetrics(
        accuracy=correct / n if n else 0.0,
        conversion_rate=hit_correct / hits if hits else 0.0,
        query_count=n,
        hit_count=hits,
        by_type={t: {"count": c, "accuracy": ok / c} for t, (c, ok) in ordered.items()},
    )


def correctness(answers: Mapping[str, str], manifest: CorpusManifest) -> dict[str, bool]:
    queries = {q.query_id: q for q in manifest.queries}
    return {qid: match_answer(a, queries[qid].gold_answer, queries[qid].question_type) for qid, a in answers.items()}


def head_to_head(correct_a: Mapping[str, bool], correct_b: Mapping[str, bool]) -> HeadToHead:
    if set(correct_a) != set(correct_b):
        raise ValueError("head-to-head needs identical query sets")
    h = HeadToHead()
    for qid, a in correct_a.items():
        b = correct_b[qid]
        if a and b:
            h.both_correct += 1
        elif a:
            h.only_a += 1
        elif b:
            h.only_b += 1
        else:
            h.both_wrong += 1
    return h


# -- reports ----------------------------------------------------------------------


@dataclass
class MethodReport:
    method: str
    retrieval: RetrievalMetrics
    qa: QaMetrics | None = None
    preprocessing_vlm_calls: int = 0
    query_vlm_calls: int = 0


@dataclass
class EvalReport:
    corpus_id: str
    methods: list[MethodReport]
    head_to_head: HeadToHead | None = None
    labels: tuple[str, str] | None = None

    def to_dict(self) -> dict:
        def pct(d):
            return None if d is None else {f"@{k}": v for k, v in d.items()}

        out = {"corpus_id": self.corpus_id, "retrieval": [], "end_to_end": [], "by_type": {}}
        for m in self.methods:
            r = m.retrieval
            out["retrieval"].append({
                "method": m.method, "page_r": pct(r.page_r_at), "mrr": r.mrr,
                "img_r": pct(r.img_r_at), "unit_r": pct(r.unit_r_at),
                "queries": r.query_count, "preprocessing_vlm_calls": m.preprocessing_vlm_calls,
            })
            if m.qa is not None:
                out["end_to_end"].append({
                    "method": m.method, "accuracy": m.qa.accuracy, "conversion_rate": m.qa.conversion_rate,
                    "hits": m.qa.hit_count, "queries": m.qa.query_count, "query_vlm_calls": m.query_vlm_calls,
                })
                out["by_type"][m.method] = m.qa.by_type
        if self.head_to_head is not None:
            a, b = self.labels or ("a", "b")
            out["head_to_head"] = {"a": a, "b": b, **asdict(self.head_to_head)}
        return out

    def summary(self) -> str:
        lines = [f"corpus {self.corpus_id}"]
        for m in self.methods:
            r = m.retrieval
            parts = [f"PageR@{k}={v:.1%}" for k, v in r.page_r_at.items()] + [f"MRR={r.mrr:.3f}"]
            if m.qa is not None:
                parts += [f"Acc={m.qa.accuracy:.1%}", f"Conv={m.qa.conversion_rate:.1%}"]
            parts.append(f"prep VLM calls={m.preprocessing_vlm_calls}")
            lines.append(f"  {m.method:<8} " + "  ".join(parts))
        if self.head_to_head is not None:
            a, b = self.labels or ("a", "b")
            h = self.head_to_head
            lines.append(
                f"  head-to-head: both {h.both_correct}, only {a} {h.only_a}, only {b} {h.only_b}, neither {h.both_wrong}"
            )
        return "\n".join(lines)


# -- evaluation driver --------------------------------------------------------------


def run_dvi_queries(manifest, bundle, params, renderer, vlm, max_inflight: int = 4):
    """Answer every manifest query through the DVI path, at most ``max_inflight`` at a time.

    Returns results in manifest query order.
    """
    from concurrent.futures import ThreadPoolExecutor

    from .pipeline import answer_query
    from .retrieval import build_postings

    if max_inflight < 1:
        raise ValueError("max_inflight must be >= 1")
    postings = build_postings(bundle)
    with ThreadPoolExecutor(max_workers=max_inflight) as pool:
        futs = [
            pool.submit(answer_query, q.question, bundle, postings, params, renderer, vlm, q.query_id)
            for q in manifest.queries
        ]
        return [f.result() for f in futs]


def run_pi_queries(manifest, pi_index, embedder, k, renderer, vlm, max_inflight: int = 4):
    """PI retrieval by cosine, then the same single VLM call over the retrieved pages."""
    from concurrent.futures import ThreadPoolExecutor

    from .pipeline import AnswerResult, VlmError, pi_search

    def one(q):
        hits = pi_search(q.question, pi_index, embedder, k)
        res = AnswerResult(q.query_id, hits)
        if hits:
            ids = [h.page_id for h in hits]
            res.vlm_called = True
            try:
                res.answer = vlm.answer(q.question, [renderer.render(p) for p in ids], ids)["answer"]
            except VlmError as exc:
                res.error = str(exc)
        return res

    with ThreadPoolExecutor(max_workers=max_inflight) as pool:
        return list(pool.map(one, manifest.queries))


def method_report(method: str, results, manifest, k: int, preprocessing_calls: int = 0) -> MethodReport:
    ranked = {r.query_id: [h.page_id for h in r.retrieved] for r in results}
    answers = {r.query_id: r.answer for r in results}
    return MethodReport(
        method=method,
        retrieval=retrieval_metrics(ranked, manifest, sorted({1, k})),
        qa=qa_metrics(answers, ranked, manifest, k),
        preprocessing_vlm_calls=preprocessing_calls,
        query_vlm_calls=sum(r.vlm_called for r in results),
    )
