"""Hierarchical drawing-number clustering.

Drawing numbers in one project share a fixed prefix and end in a numeric
suffix whose digit groups encode a taxonomy (structure / category / sheet).
This module recovers that taxonomy without looking at page content:

1. find the shared prefix and the modal numeric suffix length,
2. try every way of cutting the suffix into 1-4 digit groups and keep the
   split whose trie is most balanced,
3. label each trie node with words its member titles have in common,
4. check that titles agree more inside leaf groups than across them.
"""

from __future__ import annotations

import math
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

from .corpus import DrawingEntry
from .text import STOPWORDS, title_tokens

MIN_COVERAGE = 0.5
LABEL_SUPPORT = 0.6
BOILERPLATE_SUPPORT = 0.6
LABEL_SIZE = 5
CROSS_PAIRS = 100
JACCARD_RATIO = 2.0
JACCARD_FLOOR = 0.15

_TAIL = re.compile(r"^(?:([A-Za-z]+(?:-[A-Za-z]+)*)-?)?(\d+)$")


class NoDominantScheme(ValueError):
    """No numbering scheme covers at least half of the drawings."""


@dataclass(frozen=True)
class NumberingScheme:
    common_prefix: str
    category_tags: frozenset[str]
    suffix_len: int
    coverage: float

    def split(self, number: str) -> tuple[str, str] | None:
        """``(tag, digits)`` if ``number`` conforms, else None."""
        if not number.startswith(self.common_prefix):
            return None
        m = _TAIL.match(number[len(self.common_prefix):])
        if m is None or len(m.group(2)) != self.suffix_len:
            return None
        return m.group(1) or "", m.group(2)


@dataclass(frozen=True)
class SplitStrategy:
    widths: tuple[int, ...]

    def __post_init__(self) -> None:
        if not 1 <= len(self.widths) <= 4 or any(w not in (1, 2, 3) for w in self.widths):
            raise ValueError(f"invalid split widths {self.widths}")

    def slices(self, suffix: str) -> list[str]:
        out, pos = [], 0
        for w in self.widths:
            out.append(suffix[pos:pos + w])
            pos += w
        return out


@dataclass
class HierarchyNode:
    level: int
    code: str
    member_page_ids: set[str] = field(default_factory=set)
    children: list["HierarchyNode"] = field(default_factory=list)
    label: list[str] = field(default_factory=list)

    def walk(self) -> Iterable["HierarchyNode"]:
        yield self
        for c in self.children:
            yield from c.walk()


@dataclass
class HdncHierarchy:
    scheme: NumberingScheme
    strategy: SplitStrategy
    roots: list[HierarchyNode]
    labels_by_page: dict[str, list[str]]
    nonconforming: list[DrawingEntry] = field(default_factory=list)

    def nodes_by_level(self) -> dict[int, int]:
        counts: Counter[int] = Counter()
        for r in self.roots:
            for n in r.walk():
                counts[n.level] += 1
        return dict(sorted(counts.items()))

    def to_dict(self) -> dict:
        def node(n: HierarchyNode) -> dict:
            return {
                "level": n.level,
                "code": n.code,
                "label": list(n.label),
                "members": sorted(n.member_page_ids),
                "children": [node(c) for c in n.children],
            }

        return {
            "scheme": {
                "common_prefix": self.scheme.common_prefix,
                "category_tags": sorted(self.scheme.category_tags),
                "suffix_len": self.scheme.suffix_len,
                "coverage": self.scheme.coverage,
            },
            "widths": list(self.strategy.widths),
            "roots": [node(r) for r in self.roots],
            "labels_by_page": {k: list(v) for k, v in sorted(self.labels_by_page.items())},
            "nonconforming": [
                {"number": d.drawing_number, "title": d.title, "page_id": d.page_id} for d in self.nonconforming
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HdncHierarchy":
        def node(x: dict) -> HierarchyNode:
            return HierarchyNode(
                level=x["level"], code=x["code"], member_page_ids=set(x["members"]),
                children=[node(c) for c in x["children"]], label=list(x["label"]),
            )

        s = d["scheme"]
        return cls(
            scheme=NumberingScheme(s["common_prefix"], frozenset(s["category_tags"]), s["suffix_len"], s["coverage"]),
            strategy=SplitStrategy(tuple(d["widths"])),
            roots=[node(r) for r in d["roots"]],
            labels_by_page={k: list(v) for k, v in d["labels_by_page"].items()},
            nonconforming=[DrawingEntry(x["number"], x["title"], x["page_id"]) for x in d["nonconforming"]],
        )


@dataclass
class GroupCheck:
    node: HierarchyNode
    within_mean: float
    cross_mean: float
    passed: bool
    vacuous: bool = False


@dataclass
class JaccardReport:
    per_group: list[GroupCheck]

    @property
    def pass_rate(self) -> float:
        if not self.per_group:
            return 1.0
        return sum(g.passed for g in self.per_group) / len(self.per_group)

    def summary(self) -> dict:
        return {
            "groups": len(self.per_group),
            "passed": sum(g.passed for g in self.per_group),
            "vacuous": sum(g.vacuous for g in self.per_group),
            "pass_rate": self.pass_rate,
        }


# -- step 2: scheme discovery -------------------------------------------------


def _lcp(strings: Sequence[str]) -> str:
    lo, hi = min(strings), max(strings)
    n = 0
    while n < min(len(lo), len(hi)) and lo[n] == hi[n]:
        n += 1
    return lo[:n]


def discover_scheme(numbers: Sequence[str]) -> NumberingScheme:
    if len(numbers) < 2:
        raise ValueError("need at least 2 drawing numbers")
    lcp = _lcp(numbers)
    cut = lcp.rfind("-")
    prefix = lcp[:cut + 1] if cut >= 0 else ""

    tails = [_TAIL.match(n[len(prefix):]) for n in numbers]
    lengths = Counter(len(m.group(2)) for m in tails if m)
    if not lengths:
        raise NoDominantScheme("no drawing number ends in a digit run")
    # modal length; ties go to the longer suffix
    suffix_len = max(lengths.items(), key=lambda kv: (kv[1], kv[0]))[0]
    tags = set()
    conforming = 0
    for m in tails:
        if m and len(m.group(2)) == suffix_len:
            conforming += 1
            if m.group(1):
                tags.add(m.group(1))
    coverage = conforming / len(numbers)
    scheme = NumberingScheme(prefix, frozenset(tags), suffix_len, coverage)
    if coverage < MIN_COVERAGE:
        raise NoDominantScheme(f"best scheme covers only {coverage:.0%} of drawings")
    return scheme


# -- step 3: split search -----------------------------------------------------


def enumerate_strategies(suffix_len: int) -> list[SplitStrategy]:
    if not 1 <= suffix_len <= 12:
        raise ValueError(f"suffix_len {suffix_len} outside 1..12")
    out: list[tuple[int, ...]] = []

    def rec(left: int, acc: tuple[int, ...]) -> None:
        if left == 0:
            out.append(acc)
            return
        if len(acc) == 4:
            return
        for w in (1, 2, 3):
            if w <= left:
                rec(left - w, acc + (w,))

    rec(suffix_len, ())
    return [SplitStrategy(w) for w in sorted(out)]


def build_trie(
    conforming: Sequence[tuple[str, str]], scheme: NumberingScheme, strategy: SplitStrategy
) -> list[HierarchyNode]:
    """Trie over the width-slices of each suffix; ``conforming`` holds (number, page_id)."""
    roots: dict[str, HierarchyNode] = {}
    index: dict[tuple[str, ...], HierarchyNode] = {}
    for number, page_id in conforming:
        parts = scheme.split(number)
        if parts is None:
            raise ValueError(f"{number!r} does not conform to the scheme")
        key: tuple[str, ...] = ()
        siblings = roots
        parent = None
        for level, code in enumerate(strategy.slices(parts[1]), start=1):
            key = key + (code,)
            node = index.get(key)
            if node is None:
                node = HierarchyNode(level, code)
                index[key] = node
                if parent is None:
                    roots[code] = node
                else:
                    parent.children.append(node)
            node.member_page_ids.add(page_id)
            parent = node
    ordered = sorted(roots.values(), key=lambda n: n.code)
    for r in ordered:
        for n in r.walk():
            n.children.sort(key=lambda c: c.code)
    return ordered


def _levels(roots: Sequence[HierarchyNode]) -> list[list[HierarchyNode]]:
    levels: list[list[HierarchyNode]] = []
    frontier = list(roots)
    while frontier:
        levels.append(frontier)
        frontier = [c for n in frontier for c in n.children]
    return levels


def normalized_entropy(sizes: Sequence[int]) -> float:
    if len(sizes) < 2:
        return 0.0
    total = sum(sizes)
    h = -sum(s / total * math.log(s / total) for s in sizes if s)
    return h / math.log(len(sizes))


def score_balance(roots: Sequence[HierarchyNode]) -> float:
    """Mean per-level normalized entropy of node sizes.

    Levels made only of single-member nodes are ignored (every split ends
    in one), and a level that splits nothing further (same node count as
    the level above) contributes 0. A single level-1 node scores 0.
    """
    if not roots:
        raise ValueError("empty tree")
    levels = _levels(roots)
    if len(levels[0]) == 1:
        return 0.0
    contrib = []
    prev = None
    for nodes in levels:
        sizes = [len(n.member_page_ids) for n in nodes]
        if all(s == 1 for s in sizes):
            prev = len(nodes)
            continue
        if prev is not None and len(nodes) == prev:
            contrib.append(0.0)
        else:
            contrib.append(normalized_entropy(sizes))
        prev = len(nodes)
    return sum(contrib) / len(contrib) if contrib else 0.0


def select_strategy(
    conforming: Sequence[tuple[str, str]], scheme: NumberingScheme
) -> tuple[SplitStrategy, list[HierarchyNode]]:
    """Most balanced split; ties go to more levels, then smaller widths."""
    if not conforming:
        raise ValueError("no conforming drawings")
    best = None
    for strategy in enumerate_strategies(scheme.suffix_len):
        roots = build_trie(conforming, scheme, strategy)
        score = round(score_balance(roots), 12)
        key = (-score, -len(strategy.widths), strategy.widths)
        if best is None or key < best[0]:
            best = (key, strategy, roots)
    assert best is not None
    return best[1], best[2]


# -- step 4: labels and validation --------------------------------------------


def _label_tokens(title: str) -> set[str]:
    return {t for t in title_tokens(title) if t not in STOPWORDS}


def infer_labels(roots: Sequence[HierarchyNode], titles_by_page: dict[str, str]) -> dict[str, list[str]]:
    """Annotate every node with its label and return page -> path labels."""
    toks = {pid: _label_tokens(t) for pid, t in titles_by_page.items()}
    n_all = len(toks)
    global_df: Counter[str] = Counter()
    for ts in toks.values():
        global_df.update(ts)
    boiler = {t for t, c in global_df.items() if n_all and c / n_all >= BOILERPLATE_SUPPORT}

    for root in roots:
        for node in root.walk():
            members = node.member_page_ids
            df: Counter[str] = Counter()
            for pid in members:
                df.update(toks.get(pid, ()))
            need = LABEL_SUPPORT * len(members)
            cands = [
                (-(c / len(members)) / (global_df[t] / n_all), t)
                for t, c in df.items()
                if c >= need - 1e-9 and t not in boiler
            ]
            cands.sort()
            node.label = [t for _, t in cands[:LABEL_SIZE]]

    labels: dict[str, list[str]] = {}

    def descend(node: HierarchyNode, path: list[str]) -> None:
        here = path + node.label
        if not node.children:
            for pid in node.member_page_ids:
                labels[pid] = list(here)
        for c in node.children:
            descend(c, here)

    for r in roots:
        descend(r, [])
    return labels


def jaccard(a: set[str], b: set[str]) -> float:
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


def leaf_groups(roots: Sequence[HierarchyNode]) -> list[HierarchyNode]:
    """Lowest grouping level: parents of the trie leaves (the leaves themselves for a flat trie)."""
    levels = _levels(roots)
    if len(levels) == 1:
        return list(levels[0])
    return list(levels[-2])


def validate_jaccard(
    roots: Sequence[HierarchyNode], titles_by_page: dict[str, str], rng_seed: int = 0
) -> JaccardReport:
    rng = random.Random(rng_seed)
    toks = {pid: title_tokens(t) for pid, t in titles_by_page.items()}
    universe = sorted({pid for r in roots for pid in r.member_page_ids})
    checks: list[GroupCheck] = []
    for g in leaf_groups(roots):
        members = sorted(g.member_page_ids)
        if len(members) < 2:
            checks.append(GroupCheck(g, 1.0, 0.0, True, vacuous=True))
            continue
        within = [jaccard(toks.get(a, set()), toks.get(b, set())) for a, b in combinations(members, 2)]
        others = [p for p in universe if p not in g.member_page_ids]
        n_cross = min(CROSS_PAIRS, len(members) * len(others))
        cross = []
        for _ in range(n_cross):
            a, b = rng.choice(members), rng.choice(others)
            cross.append(jaccard(toks.get(a, set()), toks.get(b, set())))
        w = sum(within) / len(within)
        c = sum(cross) / len(cross) if cross else 0.0
        checks.append(GroupCheck(g, w, c, w >= max(JACCARD_RATIO * c, JACCARD_FLOOR)))
    return JaccardReport(checks)


def run_hdnc(entries: Sequence[DrawingEntry], rng_seed: int = 0) -> tuple[HdncHierarchy, JaccardReport]:
    if len(entries) < 2:
        raise ValueError("need at least 2 drawing entries")
    scheme = discover_scheme([e.drawing_number for e in entries])
    conforming, nonconforming = [], []
    for e in entries:
        (conforming if scheme.split(e.drawing_number) else nonconforming).append(e)
    pairs = [(e.drawing_number, e.page_id) for e in conforming]
    strategy, roots = select_strategy(pairs, scheme)

    titles: dict[str, list[str]] = {}
    for e in entries:
        titles.setdefault(e.page_id, []).append(e.title)
    titles_by_page = {pid: " ".join(ts) for pid, ts in titles.items()}

    labels = infer_labels(roots, titles_by_page)
    report = validate_jaccard(roots, titles_by_page, rng_seed)
    conforming_pages = {pid for r in roots for pid in r.member_page_ids}
    labels = {pid: ls for pid, ls in labels.items() if pid in conforming_pages}
    return HdncHierarchy(scheme, strategy, roots, labels, nonconforming), report
