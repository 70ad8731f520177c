"""Seeded synthetic corpora with known ground truth.

Two shapes are produced:

* drawing sets: structured drawing numbers (prefix + fixed-width level codes),
  titles built from per-level vocabularies, a title-block text layer and
  questions that point at one sheet;
* catalogs: no numbering, a contents page mapping categories to page ranges,
  scanned product tables whose OCR text may be garbled.
"""

from __future__ import annotations

import itertools
import random
import re
import string
from dataclasses import dataclass, field, replace
from typing import Any

from .corpus import CorpusManifest, DrawingEntry, PageRecord, QueryRecord, TocEntry

LEVEL_VOCAB: tuple[tuple[str, ...], ...] = (
    ("alder brook", "birch ford", "cedar glen", "dogwood hollow", "elm ridge", "fir creek",
     "ginkgo vale", "hazel dale", "juniper marsh", "larch heath", "maple moor", "nutmeg bay",
     "oak cove", "poplar fen", "quince knoll", "rowan mead", "spruce tarn", "tamarack weir",
     "walnut wold", "yew combe"),
    ("pier column", "abutment wall", "deck slab", "bearing plinth", "parapet rail", "pile cap",
     "girder web", "wingwall face", "drainage outfall", "joint seal", "barrier kerb",
     "approach ramp"),
    ("elevation", "plan", "section", "reinforcement", "layout", "schedule", "profile", "setting",
     "formwork", "tendon", "falsework", "lighting"),
    ("north", "south", "east", "west", "upper", "lower", "inner", "outer"),
)
SHEET_VOCAB = ("general", "typical", "details", "arrangement", "sheet", "key", "overview", "notes")
NOTE_POOL = (
    "all dimensions are in millimetres unless noted otherwise",
    "levels are in metres above datum",
    "do not scale from this drawing",
    "concrete cover to reinforcement shall be 50 mm",
    "this drawing shall be read with the specification",
    "contractor to verify all dimensions on site",
    "reinforcement laps to be staggered",
    "construction joints as shown or as approved",
    "all steelwork to be hot dip galvanised",
    "surface finish class f2 unless noted",
)
# (question_type, attribute, unit, low, high, decimals); weights follow a typical
# drawing-set question mix, dimension-heavy.
FACTS = (
    ("dimension", "clear span length", "m", 8.0, 60.0, 3),
    ("value", "design load", "kN", 100, 2500, 0),
    ("identification", "bearing type", None, None, None, None),
    ("specification", "concrete grade", None, None, None, None),
    ("count", "number of piles", None, 2, 24, 0),
)
FACT_WEIGHTS = (756, 258, 147, 134, 28)
BEARING_TYPES = ("elastomeric", "pot", "spherical", "roller", "rocker", "sliding")
GRADES = ("c30", "c35", "c40", "c45", "c50")

GARBLE_ALPHABET = string.ascii_letters + string.digits + " .,:;'|/~-"


class SynthSpecError(ValueError):
    pass


_GARBLED_RX = re.compile(r"^garbled\(\s*([0-9.]+)\s*\)$")


def parse_text_mode(mode: str) -> tuple[str, float]:
    """``"clean"``, ``"none"`` or ``"garbled(p)"`` -> (mode, p)."""
    mode = mode.strip()
    if mode in ("clean", "none"):
        return mode, 0.0
    m = _GARBLED_RX.match(mode)
    if m:
        p = float(m.group(1))
        if not 0.0 <= p <= 1.0:
            raise SynthSpecError(f"garble probability {p} outside [0, 1]")
        return "garbled", p
    raise SynthSpecError(f"unknown text mode {mode!r}")


def garble(text: str, p: float, rng: random.Random) -> str:
    """Replace each character independently with probability ``p`` by a different one."""
    if p <= 0.0:
        return text
    out = []
    for ch in text:
        if rng.random() < p:
            sub = ch
            while sub == ch:
                sub = rng.choice(GARBLE_ALPHABET)
            out.append(sub)
        else:
            out.append(ch)
    return "".join(out)


@dataclass(frozen=True)
class SynthSpec:
    prefix: str = "PRJ-"
    widths: tuple[int, ...] = (2, 2, 2)
    branches: tuple[int, ...] = (3, 2, 4)
    text_mode: str = "clean"
    query_count: int = 20
    locating_fraction: float = 0.83
    # probability that each group-level (non-leaf) word is left out of a drawing title
    title_dropout: float = 0.0
    # probability that each hierarchy word of the target is mentioned in a question
    path_word_prob: float = 1.0
    toc_page: bool = False
    vocab: tuple[tuple[str, ...], ...] | None = None
    sheet_vocab: tuple[str, ...] = SHEET_VOCAB
    note_lines: tuple[int, int] = (2, 30)
    corpus_id: str = "synthetic"

    def __post_init__(self) -> None:
        if len(self.widths) != len(self.branches) or not self.widths:
            raise SynthSpecError("widths and branches must be non-empty and of equal length")
        for w, b in zip(self.widths, self.branches):
            if w < 1 or b < 1:
                raise SynthSpecError("widths and branches must be positive")
            if b > 10**w:
                raise SynthSpecError(f"cannot encode {b} codes in {w} digit(s)")
        parse_text_mode(self.text_mode)
        if self.vocab is not None:
            if len(self.vocab) != len(self.widths):
                raise SynthSpecError("vocab needs one word list per level")
            for level, (words, b) in enumerate(zip(self.vocab, self.branches), start=1):
                if len(words) < b:
                    raise SynthSpecError(f"level {level} vocabulary has {len(words)} words, needs {b}")
            flat = [t for ws in self.vocab for w in ws for t in w.split()]
            if len(flat) != len(set(flat)):
                raise SynthSpecError("level vocabularies must be disjoint")
        if not 0.0 <= self.locating_fraction <= 1.0:
            raise SynthSpecError("locating_fraction outside [0, 1]")

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SynthSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise SynthSpecError(f"unknown spec fields: {sorted(unknown)}")
        kw = dict(d)
        for key in ("widths", "branches", "sheet_vocab", "note_lines"):
            if key in kw:
                kw[key] = tuple(kw[key])
        if kw.get("vocab") is not None:
            kw["vocab"] = tuple(tuple(ws) for ws in kw["vocab"])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise SynthSpecError(str(exc)) from None

    def level_vocab(self, level: int) -> tuple[str, ...]:
        """Words for ``level`` (0-based); falls back to generated tokens past the built-in lists."""
        if self.vocab is not None:
            return self.vocab[level]
        n = self.branches[level]
        slot = _vocab_slot(level, len(self.widths))
        base = LEVEL_VOCAB[slot] if slot is not None else ()
        if n <= len(base):
            return base
        stem = ("grp", "sub", "set", "row")[level % 4] + "abcd"[level]
        return base + tuple(f"{stem}{i}" for i in range(len(base), n))


def _vocab_slot(level: int, depth: int) -> int | None:
    """Built-in word list for ``level`` of a ``depth``-level tree.

    Group levels take the two-word phrase lists first; the leaf level always
    takes a single-word list, so sibling leaves under different parents share
    at most one title token.
    """
    if level == depth - 1:
        return 2 if depth <= 3 else 3
    return level if level < 3 else None


def _codes(width: int, count: int) -> list[str]:
    start = 1 if count < 10**width else 0
    return [str(i).zfill(width) for i in range(start, start + count)]


def _fmt_value(lo: float, hi: float, decimals: int, rng: random.Random) -> str:
    v = rng.uniform(lo, hi)
    return f"{v:.{decimals}f}" if decimals else str(int(round(v)))


def _make_fact(kind: int, rng: random.Random) -> tuple[str, str, str]:
    qtype, attr, unit, lo, hi, dec = FACTS[kind]
    if qtype == "identification":
        val = rng.choice(BEARING_TYPES)
    elif qtype == "specification":
        val = rng.choice(GRADES).upper()
    else:
        val = _fmt_value(lo, hi, dec, rng)
    answer = f"{val} {unit}" if unit else val
    return qtype, attr, answer


@dataclass
class _Sheet:
    number: str
    codes: tuple[str, ...]
    path_words: tuple[str, ...]
    title: str
    facts: list[tuple[str, str, str]] = field(default_factory=list)


def generate_synthetic_corpus(spec: SynthSpec, seed: int) -> CorpusManifest:
    """Build a drawing-set manifest; a pure function of ``(spec, seed)``."""
    rng = random.Random(f"dvi-synth:{seed}")
    grng = random.Random(f"dvi-garble:{seed}")
    mode, p = parse_text_mode(spec.text_mode)

    level_codes = [_codes(w, b) for w, b in zip(spec.widths, spec.branches)]
    vocabs = [spec.level_vocab(i) for i in range(len(spec.widths))]
    sheets: list[_Sheet] = []
    for combo in itertools.product(*(range(b) for b in spec.branches)):
        codes = tuple(level_codes[lvl][i] for lvl, i in enumerate(combo))
        path = tuple(vocabs[lvl][i] for lvl, i in enumerate(combo))
        # group-level words may be implied by context; the sheet's own word never is
        kept = [w for w in path[:-1] if rng.random() >= spec.title_dropout] + [path[-1]]
        sheet_word = rng.choice(spec.sheet_vocab)
        title = " ".join(w.title() for w in (*kept, sheet_word))
        facts = [_make_fact(k, rng) for k in range(len(FACTS))]
        sheets.append(_Sheet(spec.prefix + "".join(codes), codes, path, title, facts))

    pages: list[PageRecord] = []
    drawings: list[DrawingEntry] = []
    first = 2 if spec.toc_page else 1
    if spec.toc_page:
        lines = ["DRAWING LIST"]
        lines += [f"{s.number}  {s.title} ..... {first + i}" for i, s in enumerate(sheets)]
        toc_text = "" if mode == "none" else "\n".join(lines)
        pages.append(_page("p1", 1, toc_text, mode, 0.97, unit_id=None))

    for i, s in enumerate(sheets):
        page_no = first + i
        pid = f"p{page_no}"
        text = ""
        if mode != "none":
            text = _sheet_text(s, spec, rng)
            if mode == "garbled":
                text = garble(text, p, grng)
        conf = round(min(1.0, max(0.0, 1.0 - p - 0.1 * rng.random())), 3)
        pages.append(_page(pid, page_no, text, mode, conf, unit_id=f"u{s.codes[0]}"))
        drawings.append(DrawingEntry(s.number, s.title, pid))

    queries: list[QueryRecord] = []
    asked: dict[str, str] = {}
    for qi in range(spec.query_count):
        idx = rng.randrange(len(sheets))
        s = sheets[idx]
        kind = rng.choices(range(len(FACTS)), weights=FACT_WEIGHTS)[0]
        qtype, attr, answer = s.facts[kind]
        words = [w for w in s.path_words if rng.random() < spec.path_word_prob]
        question = f"What is the {attr}"
        if words:
            question += " on the " + " ".join(words) + " drawing"
        locate = rng.random() < spec.locating_fraction
        gold = f"p{first + idx}"
        if not locate and asked.get(question + "?", gold) != gold:
            # the same words already point at another sheet; only the number disambiguates
            locate = True
        if locate:
            question += f" {s.number}"
        asked.setdefault(question + "?", gold)
        queries.append(QueryRecord(
            query_id=f"q{qi + 1}",
            question=question + "?",
            gold_page_ids=(gold,),
            gold_answer=answer,
            question_type=qtype,
            gold_unit_id=f"u{s.codes[0]}",
        ))
    return CorpusManifest(spec.corpus_id, tuple(pages), tuple(drawings), (), tuple(queries))


def _page(pid: str, page_no: int, text: str, mode: str, conf: float, unit_id: str | None) -> PageRecord:
    if mode == "none":
        return PageRecord(pid, page_no, "", "none", None, unit_id, pid)
    if mode == "garbled":
        return PageRecord(pid, page_no, text, "ocr", conf, unit_id, pid)
    return PageRecord(pid, page_no, text, "vector_pdf", None, unit_id, pid)


def _sheet_text(s: _Sheet, spec: SynthSpec, rng: random.Random) -> str:
    lines = [f"DRAWING NO {s.number}", s.title.upper()]
    for _, attr, answer in s.facts:
        lines.append(f"{attr} {answer}")
    lo, hi = spec.note_lines
    for _ in range(rng.randint(lo, hi)):
        if rng.random() < 0.3:
            lvl = rng.randrange(len(spec.widths))
            other = rng.choice(spec.level_vocab(lvl)[: spec.branches[lvl]])
            lines.append(f"refer to {other} drawings for continuation")
        else:
            lines.append(rng.choice(NOTE_POOL))
    return "\n".join(lines)


# -- catalogs -----------------------------------------------------------------

CATALOG_CATEGORIES = (
    "universal beams", "universal columns", "joists", "parallel flange channels",
    "equal angles", "unequal angles", "tees cut from universal beams", "bearing piles",
    "circular hollow sections", "square hollow sections", "rectangular hollow sections",
    "elliptical hollow sections", "flats", "rounds", "squares", "special steels",
    "sheet piling", "rails", "crane rails", "merchant bars", "plates", "chequer plates",
    "welded beams", "castellated beams", "cold formed channels", "purlins",
)


@dataclass(frozen=True)
class CatalogSpec:
    categories: tuple[str, ...] = CATALOG_CATEGORIES
    pages_per_category: tuple[int, int] = (1, 4)
    rows_per_page: tuple[int, int] = (15, 40)
    garble_p: float = 0.4
    clean_categories: tuple[str, ...] = ()
    query_count: int = 120
    corpus_id: str = "catalog"

    def __post_init__(self) -> None:
        lo, hi = self.pages_per_category
        if not 1 <= lo <= hi:
            raise SynthSpecError("pages_per_category must satisfy 1 <= lo <= hi")
        if not self.categories:
            raise SynthSpecError("catalog needs at least one category")


def _abbrev(category: str) -> str:
    return "".join(w[0] for w in category.split()).upper()


def generate_synthetic_catalog(spec: CatalogSpec, seed: int) -> CorpusManifest:
    """Build a catalog manifest: page 1 is the contents page, then category runs."""
    rng = random.Random(f"dvi-catalog:{seed}")
    grng = random.Random(f"dvi-catalog-garble:{seed}")
    pages: list[PageRecord] = []
    toc: list[TocEntry] = []
    rows_by_page: dict[str, list[tuple[str, str]]] = {}
    page_no = 2
    for cat in spec.categories:
        n = rng.randint(*spec.pages_per_category)
        toc.append(TocEntry(cat, page_no, page_no + n - 1))
        clean = cat in spec.clean_categories
        for _ in range(n):
            pid = f"p{page_no}"
            rows = []
            lines = [cat.upper(), "dimensions and properties"]
            for _ in range(rng.randint(*spec.rows_per_page)):
                a, b, c = rng.randint(100, 999), rng.randint(50, 400), rng.randint(10, 300)
                desig = f"{_abbrev(cat)} {a}x{b}x{c}"
                mass = f"{rng.uniform(5, 400):.1f}"
                rows.append((desig, f"{mass} kg/m"))
                lines.append(f"{desig} mass {mass} kg/m depth {a} mm width {b} mm")
            text = "\n".join(lines)
            if clean:
                conf = round(rng.uniform(0.9, 0.98), 3)
            else:
                text = garble(text, spec.garble_p, grng)
                conf = round(rng.uniform(0.3, 0.6), 3)
            pages.append(PageRecord(pid, page_no, text, "ocr", conf, cat, pid))
            rows_by_page[pid] = rows
            page_no += 1

    contents = ["CONTENTS"]
    for t in toc:
        contents.append(f"{t.category.title()} dimensions ..... {t.page_start}")
        contents.append(f"{t.category.title()} section properties ..... {t.page_end}")
    pages.insert(0, PageRecord("p1", 1, "\n".join(contents), "ocr", 0.97, None, "p1"))

    product_pages = [p for p in pages if p.page_id in rows_by_page]
    queries = []
    for qi in range(spec.query_count):
        page = rng.choice(product_pages)
        desig, mass = rng.choice(rows_by_page[page.page_id])
        queries.append(QueryRecord(
            query_id=f"q{qi + 1}",
            question=f"What is the mass per metre of {desig} in the {page.unit_id} table?",
            gold_page_ids=(page.page_id,),
            gold_answer=mass,
            question_type="value",
            gold_unit_id=page.unit_id,
        ))
    return CorpusManifest(spec.corpus_id, tuple(pages), (), tuple(toc), tuple(queries))


def with_text_mode(spec: SynthSpec, text_mode: str) -> SynthSpec:
    return replace(spec, text_mode=text_mode)
