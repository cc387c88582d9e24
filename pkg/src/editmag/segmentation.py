"""Word tokenization and overlapping phrase enumeration."""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from typing import Sequence

from .errors import InvalidInput


@dataclass(frozen=True)
class Phrase:
    words: tuple[str, ...]
    start_index: int

    @property
    def text(self) -> str:
        return " ".join(self.words)

    def __len__(self) -> int:
        return len(self.words)


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def _strip_edges(token: str) -> str:
    lo, hi = 0, len(token)
    while lo < hi and _is_punct(token[lo]):
        lo += 1
    while hi > lo and _is_punct(token[hi - 1]):
        hi -= 1
    return token[lo:hi]


def tokenize_words(text: str) -> list[str]:
    """Lowercased whitespace tokens with leading/trailing punctuation removed.

    Interior punctuation survives: ``"don't well-known step"`` gives
    ``["don't", "well-known", "step"]``.
    """
    out = []
    for raw in text.split():
        tok = _strip_edges(raw.lower())
        if tok:
            out.append(tok)
    return out


def phrase_count(length: int, a: int, b: int) -> int:
    if length == 0:
        return 0
    if length < a:
        return 1
    return sum(length - n + 1 for n in range(a, min(b, length) + 1))


def enumerate_phrases(words: Sequence[str], a: int, b: int) -> list[Phrase]:
    """All contiguous windows of ``a``..``b`` words, shortest length first.

    A non-empty sequence shorter than ``a`` yields itself as a single phrase.
    """
    if a < 1 or b < 1:
        raise InvalidInput(f"phrase lengths must be positive, got a={a}, b={b}")
    if a > b:
        raise InvalidInput(f"a={a} exceeds b={b}")
    words = tuple(words)
    total = len(words)
    if total == 0:
        return []
    if total < a:
        return [Phrase(words, 0)]
    phrases = []
    for n in range(a, min(b, total) + 1):
        for i in range(total - n + 1):
            phrases.append(Phrase(words[i : i + n], i))
    return phrases
