"""Query-time answering and the pre-ingestion baseline.

DVI path: BM25 finds the top-k pages, a renderer turns them into image
handles, and one VLM call sees those images with the question.

PI baseline: every page is described once, up front, without knowing any
question; descriptions are embedded and queries are answered by cosine
similarity over those vectors.

VLMs, describers and embedders are duck-typed: anything with the right
``answer`` / ``embed`` method works. Adapters for an external command and an
HTTP endpoint share one JSON wire format::

    request:  {"question": str, "image_refs": [str], "page_ids": [str]}
    response: {"answer": str}
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import shlex
import subprocess
import threading
import time
import urllib.error
import urllib.request
from collections import Counter
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .corpus import CorpusManifest
from .indexer import IndexBundle
from .retrieval import Bm25Params, PostingsIndex, SearchHit, search
from .text import tokenize

WRONG_ANSWER = "unable to determine"
DESCRIBE_PROMPT = "Describe this page."
ENV_VLM_CMD = "DVI_VLM_CMD"
ENV_VLM_URL = "DVI_VLM_URL"


class VlmError(RuntimeError):
    """An adapter failed to produce an answer."""


class _Counted:
    """Thread-safe ``calls`` counter shared by adapters, mocks and embedders."""

    calls: int
    _lock: threading.Lock

    def _tick(self) -> None:
        with self._lock:
            self.calls += 1


class VlmClient(Protocol):
    def answer(self, question: str, images: Sequence[str], page_ids: Sequence[str]) -> dict: ...


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


class Renderer(Protocol):
    def render(self, page_id: str) -> str: ...


class IdentityRenderer:
    """Image handle is the page id itself."""

    def render(self, page_id: str) -> str:
        return page_id


class ManifestRenderer:
    """Resolve a page's ``image_ref`` from the manifest, falling back to the page id."""

    def __init__(self, manifest: CorpusManifest):
        self._refs = {p.page_id: p.image_ref or p.page_id for p in manifest.pages}

    def render(self, page_id: str) -> str:
        return self._refs.get(page_id, page_id)


# -- VLM adapters -------------------------------------------------------------


def _request_body(question: str, images: Sequence[str], page_ids: Sequence[str]) -> str:
    return json.dumps({"question": question, "image_refs": list(images), "page_ids": list(page_ids)},
                      ensure_ascii=False)


def _parse_response(raw: str) -> dict:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise VlmError(f"adapter returned invalid JSON: {exc.msg}") from None
    if not isinstance(obj, dict) or not isinstance(obj.get("answer"), str):
        raise VlmError("adapter response lacks a string 'answer'")
    return {"answer": obj["answer"], "raw": raw}


class CommandVlm(_Counted):
    """Run an external command per call: request JSON on stdin, response JSON on stdout."""

    def __init__(self, command: str | Sequence[str] | None = None, timeout: float = 300.0):
        command = command if command is not None else os.environ.get(ENV_VLM_CMD)
        if not command:
            raise VlmError(f"no VLM command configured (set {ENV_VLM_CMD})")
        self.argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self.calls = 0
        self._lock = threading.Lock()

    def answer(self, question: str, images: Sequence[str], page_ids: Sequence[str]) -> dict:
        self._tick()
        try:
            proc = subprocess.run(
                self.argv, input=_request_body(question, images, page_ids), capture_output=True,
                text=True, encoding="utf-8", timeout=self.timeout,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise VlmError(f"VLM command failed: {exc}") from None
        if proc.returncode != 0:
            raise VlmError(f"VLM command exited {proc.returncode}: {proc.stderr.strip()[:200]}")
        return _parse_response(proc.stdout)


class HttpVlm(_Counted):
    """POST the request JSON to a URL and read the response JSON."""

    def __init__(self, url: str | None = None, timeout: float = 300.0):
        url = url or os.environ.get(ENV_VLM_URL)
        if not url:
            raise VlmError(f"no VLM URL configured (set {ENV_VLM_URL})")
        self.url = url
        self.timeout = timeout
        self.calls = 0
        self._lock = threading.Lock()

    def answer(self, question: str, images: Sequence[str], page_ids: Sequence[str]) -> dict:
        self._tick()
        req = urllib.request.Request(
            self.url, data=_request_body(question, images, page_ids).encode("utf-8"),
            headers={"Content-Type": "application/json"}, method="POST",
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return _parse_response(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError) as exc:
            raise VlmError(f"VLM HTTP call failed: {exc}") from None


@dataclass
class MockVlmSpec:
    mode: str = "oracle"  # oracle | lossy | fixed
    conversion: float = 1.0
    fixed_answer: str = ""
    seed: int = 0

    @classmethod
    def parse(cls, selector: str, seed: int = 0) -> "MockVlmSpec":
        """``oracle``, ``lossy:<c>`` or ``fixed:<answer>``."""
        kind, _, arg = selector.partition(":")
        if kind == "oracle" and not arg:
            return cls("oracle", seed=seed)
        if kind == "lossy":
            try:
                c = float(arg)
            except ValueError:
                raise ValueError(f"bad lossy rate {arg!r}") from None
            if not 0.0 <= c <= 1.0:
                raise ValueError("lossy rate must lie in [0, 1]")
            return cls("lossy", conversion=c, seed=seed)
        if kind == "fixed":
            return cls("fixed", fixed_answer=arg, seed=seed)
        raise ValueError(f"unknown mock VLM selector {selector!r}")


class MockVlm(_Counted):
    """Answers from the manifest's gold answers.

    The question text identifies the query. The answer is correct only if a
    gold page is among the shown pages; in lossy mode it is then correct with
    probability ``conversion``, drawn from a stream keyed on (seed, query) so
    results do not depend on call order.
    """

    def __init__(self, manifest: CorpusManifest, spec: MockVlmSpec = MockVlmSpec()):
        self.spec = spec
        self._by_question = {q.question: q for q in manifest.queries}
        self.answer_key = {(pid, q.query_id): q.gold_answer for q in manifest.queries for pid in q.gold_page_ids}
        self.calls = 0
        self._lock = threading.Lock()

    def answer(self, question: str, images: Sequence[str], page_ids: Sequence[str]) -> dict:
        self._tick()
        if self.spec.mode == "fixed":
            return {"answer": self.spec.fixed_answer, "raw": self.spec.fixed_answer}
        q = self._by_question.get(question)
        ans = WRONG_ANSWER
        if q is not None:
            shown = [pid for pid in page_ids if (pid, q.query_id) in self.answer_key]
            if shown:
                ok = True
                if self.spec.mode == "lossy":
                    ok = random.Random(f"{self.spec.seed}:{q.query_id}").random() < self.spec.conversion
                if ok:
                    ans = self.answer_key[(shown[0], q.query_id)]
        return {"answer": ans, "raw": ans}


def make_vlm(selector: str, manifest: CorpusManifest | None = None, seed: int = 0) -> VlmClient:
    """``mock:oracle``, ``mock:lossy:<c>``, ``mock:fixed:<a>``, ``cmd`` or ``http``."""
    if selector.startswith("mock:"):
        if manifest is None:
            raise ValueError("mock VLMs need a manifest for their answer key")
        return MockVlm(manifest, MockVlmSpec.parse(selector[len("mock:"):], seed))
    if selector == "cmd" or selector.startswith("cmd:"):
        return CommandVlm(selector[4:] or None)
    if selector == "http" or selector.startswith("http:"):
        return HttpVlm(selector[5:] or None)
    raise ValueError(f"unknown VLM selector {selector!r}")


# -- DVI answering ------------------------------------------------------------


@dataclass
class AnswerResult:
    query_id: str | None
    retrieved: list[SearchHit]
    answer: str = ""
    vlm_called: bool = False
    latency_ms: int = 0
    error: str | None = None


def answer_query(
    question: str,
    bundle: IndexBundle,
    postings: PostingsIndex,
    params: Bm25Params,
    renderer: Renderer,
    vlm: VlmClient,
    query_id: str | None = None,
) -> AnswerResult:
    t0 = time.perf_counter()
    hits = search(question, postings, params)
    result = AnswerResult(query_id, hits)
    if hits:
        page_ids = [h.page_id for h in hits]
        images = [renderer.render(pid) for pid in page_ids]
        result.vlm_called = True
        try:
            result.answer = vlm.answer(question, images, page_ids)["answer"]
        except VlmError as exc:
            result.error = str(exc)
    result.latency_ms = int(round((time.perf_counter() - t0) * 1000))
    return result


# -- pre-ingestion baseline -----------------------------------------------------

HOMOGENIZED_TEMPLATE = (
    "this engineering drawing sheet shows a structural general arrangement with dimension "
    "annotations reinforcement details section views and general notes the drawing includes "
    "a title block revision table grid lines and dimension chains typical of a bridge "
    "structure drawing package "
)


class BlindDescriber(_Counted):
    """Describer stand-in: the page's drawing titles plus its first 50 text tokens."""

    n_tokens = 50

    def __init__(self, manifest: CorpusManifest):
        titles = manifest.titles_by_page()
        self._desc = {}
        for p in manifest.pages:
            words = tokenize(p.text)[: self.n_tokens]
            self._desc[p.page_id] = " ".join([titles.get(p.page_id, ""), *words]).strip()
        self.calls = 0
        self._lock = threading.Lock()

    def answer(self, question: str, images: Sequence[str], page_ids: Sequence[str]) -> dict:
        self._tick()
        text = " ".join(self._desc.get(pid, "") for pid in page_ids)
        return {"answer": text, "raw": text}


class HomogenizedDescriber(_Counted):
    """Describer stand-in whose output is nearly the same for every page.

    A long shared boilerplate paragraph plus the first word of the page's
    drawing title, which is all that separates one description from another.
    """

    repeats = 4

    def __init__(self, manifest: CorpusManifest):
        titles = manifest.titles_by_page()
        self._first = {p.page_id: (titles.get(p.page_id, "").split() or [""])[0].lower() for p in manifest.pages}
        self.calls = 0
        self._lock = threading.Lock()

    def answer(self, question: str, images: Sequence[str], page_ids: Sequence[str]) -> dict:
        self._tick()
        tail = " ".join(self._first.get(pid, "") for pid in page_ids)
        text = (HOMOGENIZED_TEMPLATE * self.repeats + tail).strip()
        return {"answer": text, "raw": text}


class HashEmbedder(_Counted):
    """Deterministic bag-of-tokens embedding.

    Each token maps to a unit vector drawn from a generator seeded by a hash
    of (seed, token); a text's vector is the count-weighted sum, L2-normalized.
    """

    def __init__(self, dim: int = 256, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self.calls = 0
        self._lock = threading.Lock()
        self._cache: dict[str, np.ndarray] = {}

    def _token_vec(self, tok: str) -> np.ndarray:
        v = self._cache.get(tok)
        if v is None:
            h = hashlib.blake2b(f"{self.seed}\x00{tok}".encode("utf-8"), digest_size=8).digest()
            rng = np.random.default_rng(int.from_bytes(h, "little"))
            v = rng.standard_normal(self.dim)
            v /= np.linalg.norm(v)
            self._cache[tok] = v
        return v

    def embed(self, text: str) -> np.ndarray:
        self._tick()
        out = np.zeros(self.dim)
        for tok, n in Counter(tokenize(text)).items():
            out += n * self._token_vec(tok)
        norm = np.linalg.norm(out)
        return out / norm if norm > 0 else out


@dataclass
class PiIndex:
    vectors: list[tuple[str, np.ndarray]] = field(default_factory=list)
    descriptions: list[tuple[str, str]] = field(default_factory=list)
    page_nos: dict[str, int] = field(default_factory=dict)
    describer_calls: int = 0

    @property
    def dim(self) -> int | None:
        return len(self.vectors[0][1]) if self.vectors else None


class PiBuildError(RuntimeError):
    def __init__(self, page_index: int, page_id: str, cause: Exception):
        self.page_index = page_index
        super().__init__(f"description failed at page index {page_index} ({page_id}): {cause}")


def build_pi_index(manifest: CorpusManifest, describer: VlmClient, embedder: Embedder) -> PiIndex:
    """Describe and embed every page, one describer call per page."""
    idx = PiIndex()
    for i, page in enumerate(sorted(manifest.pages, key=lambda p: p.page_no)):
        ref = page.image_ref or page.page_id
        try:
            desc = describer.answer(DESCRIBE_PROMPT, [ref], [page.page_id])["answer"]
        except Exception as exc:  # adapter failures of any kind abort the build
            raise PiBuildError(i, page.page_id, exc) from exc
        idx.describer_calls += 1
        vec = np.asarray(embedder.embed(desc), dtype=float)
        if idx.vectors and len(vec) != len(idx.vectors[0][1]):
            raise ValueError("embedder returned vectors of varying dimension")
        idx.descriptions.append((page.page_id, desc))
        idx.vectors.append((page.page_id, vec))
        idx.page_nos[page.page_id] = page.page_no
    return idx


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def pi_search(question: str, pi_index: PiIndex, embedder: Embedder, k: int = 3) -> list[SearchHit]:
    if not pi_index.vectors:
        return []
    q = np.asarray(embedder.embed(question), dtype=float)
    if len(q) != pi_index.dim:
        raise ValueError(f"query vector has dimension {len(q)}, index has {pi_index.dim}")
    mat = np.stack([v for _, v in pi_index.vectors])
    norms = np.linalg.norm(mat, axis=1) * np.linalg.norm(q)
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = np.where(norms > 0, mat @ q / np.where(norms > 0, norms, 1.0), 0.0)
    order = sorted(range(len(sims)), key=lambda i: (-sims[i], pi_index.page_nos[pi_index.vectors[i][0]]))
    return [SearchHit(pi_index.vectors[i][0], float(sims[i]), r) for r, i in enumerate(order[:k], start=1)]
