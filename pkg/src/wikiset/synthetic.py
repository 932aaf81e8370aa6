"""Seeded synthetic corpora for tests and benchmarks.

Words are pronounceable consonant-vowel strings drawn from a Zipf-like
distribution, so term statistics look roughly like natural text.
"""

from __future__ import annotations

import numpy as np

from .dataset import Document, Query, QuerySource

_CONSONANTS = "bcdfghjklmnprstvz"
_VOWELS = "aeiou"


def vocabulary(size: int, seed: int = 0) -> list[str]:
    """``size`` distinct lowercase pseudo-words of 2 to 4 syllables."""
    rng = np.random.default_rng(seed)
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < size:
        n_syl = int(rng.integers(2, 5))
        cs = rng.integers(0, len(_CONSONANTS), n_syl)
        vs = rng.integers(0, len(_VOWELS), n_syl)
        w = "".join(_CONSONANTS[c] + _VOWELS[v] for c, v in zip(cs, vs))
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


def _zipf_weights(n: int, s: float = 1.07) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** s
    return w / w.sum()


def synthetic_documents(n_docs: int, avg_len: int = 700, vocab_size: int = 50_000,
                        seed: int = 0) -> list[Document]:
    """Documents ``d0 .. d{n-1}``; lengths are uniform in ``[avg_len/2, 3*avg_len/2]``."""
    rng = np.random.default_rng(seed)
    vocab = vocabulary(vocab_size, seed)
    cdf = np.cumsum(_zipf_weights(vocab_size))
    lo = max(1, avg_len // 2)
    lengths = rng.integers(lo, lo + avg_len + 1, n_docs)
    word_ids = np.searchsorted(cdf, rng.random(int(lengths.sum())) * cdf[-1], side="right")
    np.minimum(word_ids, vocab_size - 1, out=word_ids)
    bounds = np.concatenate(([0], np.cumsum(lengths)))
    docs = []
    for i in range(n_docs):
        ids = word_ids[bounds[i]:bounds[i + 1]].tolist()
        docs.append(Document(f"d{i}", " ".join([vocab[j] for j in ids])))
    return docs


def synthetic_queries(n_queries: int, vocab_size: int = 50_000, max_words: int = 4,
                      seed: int = 1, vocab_seed: int = 0) -> list[Query]:
    """Short queries over the same vocabulary, biased toward mid-frequency words."""
    rng = np.random.default_rng(seed)
    vocab = vocabulary(vocab_size, vocab_seed)
    queries = []
    for i in range(n_queries):
        n = int(rng.integers(1, max_words + 1))
        picks = rng.integers(0, min(vocab_size, 5_000), n)
        queries.append(Query(f"q{i}", " ".join(vocab[j] for j in picks), QuerySource.TITLE))
    return queries
