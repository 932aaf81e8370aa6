"""Okapi BM25 first-stage ranking over an :class:`InvertedIndex`.

    score(q, d) = sum over query tokens t of
        idf(t) * tf(t,d) * (k1 + 1) / (tf(t,d) + k1 * (1 - b + b * |d| / avgdl))

    idf(t) = ln((|C| + 1) / df(t))

Repeated query tokens count once per occurrence. Only documents sharing at
least one term with the query are scored, so every emitted score is > 0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import IO, Iterable, NamedTuple

import numpy as np

from .dataset import Query, id_sort_key
from .index import InvertedIndex
from .textproc import Analyzer

__all__ = [
    "Bm25Params",
    "Bm25Ranker",
    "EmptyIndexError",
    "RunEntry",
    "bm25_score",
    "format_run_line",
    "idf",
    "rank_topk",
    "read_run",
    "write_run",
]

log = logging.getLogger(__name__)


class EmptyIndexError(ValueError):
    pass


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.5
    b: float = 0.75
    top_k: int = 100

    def __post_init__(self):
        if not self.k1 >= 0:
            raise ValueError(f"k1 must be >= 0, got {self.k1}")
        if not 0 <= self.b <= 1:
            raise ValueError(f"b must be in [0, 1], got {self.b}")
        if int(self.top_k) != self.top_k or self.top_k < 1:
            raise ValueError(f"top_k must be a positive integer, got {self.top_k}")


class RunEntry(NamedTuple):
    query_id: str
    doc_id: str
    rank: int
    score: float


def idf(index: InvertedIndex, term: str) -> float:
    """``ln((|C|+1)/df)``; an unseen term gets ``ln(|C|+1)``."""
    if index.doc_count == 0:
        raise EmptyIndexError("index has no documents")
    df = index.document_frequency(term)
    return math.log((index.doc_count + 1) / (df if df else 1))


def bm25_score(index: InvertedIndex, params: Bm25Params, query_tokens: Iterable[str],
               ordinal: int) -> float:
    """Score one document directly from its postings (no vectorization)."""
    if index.doc_count == 0:
        raise EmptyIndexError("index has no documents")
    dl = float(index.doc_lengths[ordinal])
    norm = params.k1 * (1 - params.b + params.b * dl / index.avgdl)
    score = 0.0
    for term in query_tokens:
        ords, tfs = index.postings(term)
        pos = int(np.searchsorted(ords, ordinal))
        if pos < ords.size and ords[pos] == ordinal:
            tf = float(tfs[pos])
            score += idf(index, term) * tf * (params.k1 + 1) / (tf + norm)
    return score


class Bm25Ranker:
    """Term-at-a-time scorer holding the per-document length normalization."""

    def __init__(self, index: InvertedIndex, params: Bm25Params | None = None,
                 analyzer: Analyzer | None = None):
        if index.doc_count == 0:
            raise EmptyIndexError("index has no documents")
        self.index = index
        self.params = params or Bm25Params()
        self.analyzer = analyzer or Analyzer()
        k1, b = self.params.k1, self.params.b
        self._norm = k1 * (1 - b + b * index.doc_lengths.astype(np.float64) / index.avgdl)
        # position of each ordinal when documents are sorted by id, for tie-breaks
        order = sorted(range(index.doc_count), key=lambda i: id_sort_key(index.doc_ids[i]))
        self._id_rank = np.empty(index.doc_count, dtype=np.int64)
        self._id_rank[order] = np.arange(index.doc_count)

    def score_tokens(self, tokens: list[str]) -> tuple[np.ndarray, np.ndarray]:
        """``(ordinals, scores)`` of every document matching any token."""
        index = self.index
        k1p1 = self.params.k1 + 1
        acc = np.zeros(index.doc_count, dtype=np.float64)
        touched = np.zeros(index.doc_count, dtype=bool)
        for term in tokens:
            ords, tfs = index.postings(term)
            if ords.size == 0:
                continue
            tf = tfs.astype(np.float64)
            w = idf(index, term)
            acc[ords] += w * (tf * k1p1) / (tf + self._norm[ords])
            touched[ords] = True
        hits = np.flatnonzero(touched)
        return hits, acc[hits]

    def rank(self, query_id: str, text: str) -> list[RunEntry]:
        tokens = self.analyzer(text)
        if not tokens:
            log.warning("query %s has no searchable terms; no results", query_id)
            return []
        hits, scores = self.score_tokens(tokens)
        k = self.params.top_k
        if hits.size > k:
            # keep everything tied with the k-th score, then break ties by id
            kth = np.partition(scores, hits.size - k)[hits.size - k]
            keep = scores >= kth
            hits, scores = hits[keep], scores[keep]
        order = np.lexsort((self._id_rank[hits], -scores))[:k]
        doc_ids = self.index.doc_ids
        return [RunEntry(query_id, doc_ids[hits[i]], r, float(scores[i]))
                for r, i in enumerate(order, 1)]


def rank_topk(index: InvertedIndex, params: Bm25Params | None, queries: Iterable[Query],
              analyzer: Analyzer | None = None) -> list[RunEntry]:
    """Top-k run for every query, in query order; ties go to the smaller doc id."""
    ranker = Bm25Ranker(index, params, analyzer)
    run: list[RunEntry] = []
    for q in queries:
        run.extend(ranker.rank(q.query_id, q.text))
    return run


def format_run_line(entry: RunEntry, tag: str = "bm25") -> str:
    return f"{entry.query_id} Q0 {entry.doc_id} {entry.rank} {entry.score:.6f} {tag}"


def write_run(entries: Iterable[RunEntry], out: IO[str], tag: str = "bm25") -> None:
    for e in entries:
        out.write(format_run_line(e, tag) + "\n")


def read_run(lines: Iterable[str]) -> list[RunEntry]:
    """Parse a TREC run: ``qid Q0 docid rank score tag``."""
    entries = []
    for lineno, line in enumerate(lines, 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 6:
            raise ValueError(f"run line {lineno}: expected 6 fields, got {len(parts)}")
        entries.append(RunEntry(parts[0], parts[2], int(parts[3]), float(parts[4])))
    return entries
