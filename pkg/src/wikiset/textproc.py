"""Text cleaning for dataset files and the analysis chain used for BM25.

Dataset files get :func:`clean_text` only: anchors reduced to their text,
everything outside ``[a-z0-9]`` turned into a space, whitespace collapsed.
Stemming and stopword removal happen only in :func:`analyze_for_search`, so
the emitted documents and queries keep every word.
"""

from __future__ import annotations

import hashlib
import re
from functools import lru_cache
from importlib import resources

from .porter import porter_stem

__all__ = [
    "STOPWORDS_RESOURCE",
    "Analyzer",
    "analyze_for_search",
    "clean_text",
    "load_stopwords",
    "porter_stem",
    "stopwords_digest",
    "tokenize",
]

STOPWORDS_RESOURCE = "stopwords_en.txt"

_ANCHOR_TAG = re.compile(r"<a(?:\s[^<>]*)?>|</a\s*>", re.IGNORECASE)
_NON_ALNUM_LOWER = re.compile(r"[^a-z0-9]+")
_NON_ALNUM = re.compile(r"[^A-Za-z0-9]+")


def clean_text(raw: str, lowercase: bool = True) -> str:
    """Return ``raw`` reduced to ASCII letters, digits and single spaces.

    >>> clean_text('<a href="Regressive%20autism">worsening</a>')
    'worsening'
    >>> clean_text("Anti-Authoritarian!")
    'anti authoritarian'
    """
    text = _ANCHOR_TAG.sub(" ", raw)
    if lowercase:
        return _NON_ALNUM_LOWER.sub(" ", text.lower()).strip()
    return _NON_ALNUM.sub(" ", text).strip()


def tokenize(text: str) -> list[str]:
    return text.split()


def _read_stopwords_resource() -> bytes:
    return resources.files("wikiset.resources").joinpath(STOPWORDS_RESOURCE).read_bytes()


@lru_cache(maxsize=None)
def load_stopwords() -> frozenset[str]:
    """The embedded 179-word English stopword list."""
    lines = _read_stopwords_resource().decode("utf-8").splitlines()
    return frozenset(w.strip() for w in lines if w.strip())


@lru_cache(maxsize=None)
def stopwords_digest() -> str:
    return hashlib.sha256(_read_stopwords_resource()).hexdigest()


class Analyzer:
    """Clean, tokenize, drop stopwords, Porter-stem. Stems are memoized per token."""

    def __init__(self, stopwords: frozenset[str] | set[str] | None = None):
        self.stopwords = load_stopwords() if stopwords is None else frozenset(stopwords)
        self._stems: dict[str, str] = {}

    def stem(self, token: str) -> str:
        stem = self._stems.get(token)
        if stem is None:
            stem = self._stems[token] = porter_stem(token)
        return stem

    def __call__(self, text: str) -> list[str]:
        stems = self._stems
        stop = self.stopwords
        out = []
        for tok in clean_text(text).split():
            if tok in stop:
                continue
            stem = stems.get(tok)
            if stem is None:
                stem = stems[tok] = porter_stem(tok)
            out.append(stem)
        return out


_default_analyzer: Analyzer | None = None


def analyze_for_search(text: str, stopwords: frozenset[str] | set[str] | None = None) -> list[str]:
    """Search-time analysis: tokens minus stopwords, each Porter-stemmed.

    >>> analyze_for_search("the developmental disorders")
    ['development', 'disord']
    """
    global _default_analyzer
    if stopwords is not None:
        return Analyzer(stopwords)(text)
    if _default_analyzer is None:
        _default_analyzer = Analyzer()
    return _default_analyzer(text)
