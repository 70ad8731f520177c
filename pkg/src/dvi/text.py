"""Tokenizers shared by retrieval, label inference and answer matching."""

from __future__ import annotations

import re

# Fixed 30-word list; used for label inference and keyword answer matching.
# Retrieval itself never drops stopwords.
STOPWORDS = frozenset(
    """
    a an and are as at be by do does for from how in is it its
    many of on or shown that the this to was what which with
    """.split()
)

_ALNUM = re.compile(r"[^\W_]+")
_IDENT = re.compile(r"[^\W_]+(?:-[^\W_]+)+")


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric runs, plus each hyphen-joined run as one extra token.

    >>> tokenize("Bridge-A Pier-3 Dimension")
    ['bridge', 'a', 'bridge-a', 'pier', '3', 'pier-3', 'dimension']
    """
    text = text.lower()
    extras = {m.end(): m.group() for m in _IDENT.finditer(text)}
    out: list[str] = []
    for m in _ALNUM.finditer(text):
        out.append(m.group())
        ident = extras.get(m.end())
        if ident is not None:
            out.append(ident)
    return out


def title_tokens(title: str) -> set[str]:
    """Token set of a drawing title for grouping: no identifiers, no 1-char tokens."""
    return {t for t in _ALNUM.findall(title.lower()) if len(t) > 1}


def normalize_ws(text: str) -> str:
    return " ".join(text.split())
