"""Inverted index with the statistics BM25 needs.

Postings live in two flat int32 arrays (document ordinals and term
frequencies) with one ``[start, end)`` slice per term, ordinals ascending
inside each slice.

On disk the index is a versioned, little-endian file of length-prefixed
sections. Ordinals are stored as gaps and every integer stream is LEB128
varint-coded. A trailing SHA-256 covers everything before it.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from array import array
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dataset import Document
from .textproc import Analyzer, stopwords_digest

__all__ = [
    "FORMAT_VERSION",
    "IndexFormatError",
    "InvertedIndex",
    "build_index",
    "decode_varints",
    "document_frequency",
    "encode_varints",
    "load_index",
    "persist_index",
]

MAGIC = b"WSETIDX\x00"
FORMAT_VERSION = 1
ANALYZER_NAME = "porter+stopwords_en"


class IndexFormatError(Exception):
    """The index file is from another version, truncated, or corrupt."""


def encode_varints(values: np.ndarray | Sequence[int]) -> bytes:
    """LEB128-encode non-negative integers: 7 bits per byte, high bit = more."""
    v = np.asarray(values, dtype=np.uint64)
    if v.size == 0:
        return b""
    nbytes = np.ones(v.shape, dtype=np.int64)
    for shift in range(7, 64, 7):
        nbytes += v >= np.uint64(1 << shift)
    starts = np.cumsum(nbytes) - nbytes
    out = np.empty(int(nbytes.sum()), dtype=np.uint8)
    for b in range(int(nbytes.max())):
        mask = nbytes > b
        chunk = (v[mask] >> np.uint64(7 * b)) & np.uint64(0x7F)
        more = (nbytes[mask] > b + 1).astype(np.uint64) << np.uint64(7)
        out[starts[mask] + b] = (chunk | more).astype(np.uint8)
    return out.tobytes()


def decode_varints(buf: bytes | memoryview) -> np.ndarray:
    b = np.frombuffer(buf, dtype=np.uint8)
    if b.size == 0:
        return np.zeros(0, dtype=np.int64)
    if b[-1] & 0x80:
        raise IndexFormatError("varint stream ends mid-value")
    ends = np.flatnonzero(b < 0x80)
    starts = np.empty_like(ends)
    starts[0] = 0
    starts[1:] = ends[:-1] + 1
    lengths = ends - starts + 1
    if lengths.max() > 10:
        raise IndexFormatError("varint longer than 10 bytes")
    pos = np.arange(b.size) - np.repeat(starts, lengths)
    vals = (b & 0x7F).astype(np.uint64) << (7 * pos).astype(np.uint64)
    return np.add.reduceat(vals, starts).astype(np.int64)


class InvertedIndex:
    """Immutable after construction; safe to share between readers."""

    def __init__(self, doc_ids: list[str], doc_lengths: np.ndarray, terms: list[str],
                 offsets: np.ndarray, ordinals: np.ndarray, tfs: np.ndarray, meta: dict):
        self.doc_ids = doc_ids
        self.doc_lengths = np.asarray(doc_lengths, dtype=np.int64)
        self.terms = terms
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.ordinals = np.asarray(ordinals, dtype=np.int32)
        self.tfs = np.asarray(tfs, dtype=np.int32)
        self.meta = meta
        self._term_index = {t: i for i, t in enumerate(terms)}
        self.doc_count = len(doc_ids)
        self.total_length = int(self.doc_lengths.sum())
        self.avgdl = self.total_length / self.doc_count if self.doc_count else 0.0

    def __contains__(self, term: str) -> bool:
        return term in self._term_index

    def postings(self, term: str) -> tuple[np.ndarray, np.ndarray]:
        """``(ordinals, tfs)`` for ``term``; empty arrays for unknown terms."""
        i = self._term_index.get(term)
        if i is None:
            return self.ordinals[:0], self.tfs[:0]
        lo, hi = self.offsets[i], self.offsets[i + 1]
        return self.ordinals[lo:hi], self.tfs[lo:hi]

    def document_frequency(self, term: str) -> int:
        i = self._term_index.get(term)
        return 0 if i is None else int(self.offsets[i + 1] - self.offsets[i])

    def collection_frequency(self, term: str) -> int:
        return int(self.postings(term)[1].sum())

    @property
    def posting_count(self) -> int:
        return int(self.ordinals.size)

    def __repr__(self) -> str:
        return (f"InvertedIndex(docs={self.doc_count}, terms={len(self.terms)}, "
                f"postings={self.posting_count})")


def document_frequency(index: InvertedIndex, term: str) -> int:
    return index.document_frequency(term)


def documents_digest(documents: Iterable[Document]) -> str:
    h = hashlib.sha256()
    for d in documents:
        h.update(f"{d.doc_id}\t{d.text}\n".encode("utf-8"))
    return h.hexdigest()


_worker_analyzer: Analyzer | None = None


def _count_terms(texts: list[str]) -> list[dict[str, int]]:
    global _worker_analyzer
    if _worker_analyzer is None:
        _worker_analyzer = Analyzer()
    return [Counter(_worker_analyzer(t)) for t in texts]


def _term_counts(texts: Sequence[str], analyzer: Analyzer, threads: int,
                 chunk: int = 2000) -> Iterable[dict[str, int]]:
    if threads <= 1 or len(texts) < 2 * chunk:
        for t in texts:
            yield Counter(analyzer(t))
        return
    batches = [list(texts[i:i + chunk]) for i in range(0, len(texts), chunk)]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        for counts in pool.map(_count_terms, batches):
            yield from counts


def build_index(documents: Iterable[Document], analyzer: Analyzer | None = None,
                threads: int = 1) -> InvertedIndex:
    """Analyze every document and collect postings.

    ``threads`` > 1 analyzes in worker processes; postings are merged in
    document order, so the result does not depend on it. Duplicate document
    ids raise ``ValueError``.
    """
    documents = list(documents)
    if analyzer is None:
        analyzer = Analyzer()
    if threads == 0:
        threads = os.cpu_count() or 1
    seen: set[str] = set()
    for d in documents:
        if d.doc_id in seen:
            raise ValueError(f"duplicate document id {d.doc_id!r}")
        if not d.doc_id or len(d.doc_id.split()) != 1 or d.doc_id.strip() != d.doc_id:
            raise ValueError(f"document id {d.doc_id!r} is empty or contains whitespace")
        seen.add(d.doc_id)

    # term -> interleaved (ordinal, tf) pairs
    acc: dict[str, array] = {}
    lengths = np.zeros(len(documents), dtype=np.int64)
    counts_iter = _term_counts([d.text for d in documents], analyzer, threads)
    for ordinal, counts in enumerate(counts_iter):
        total = 0
        for term, tf in counts.items():
            buf = acc.get(term)
            if buf is None:
                buf = acc[term] = array("i")
            buf.append(ordinal)
            buf.append(tf)
            total += tf
        lengths[ordinal] = total

    terms = sorted(acc)
    pairs = [np.frombuffer(acc[t], dtype=np.int32) for t in terms]
    offsets = np.zeros(len(terms) + 1, dtype=np.int64)
    if terms:
        offsets[1:] = np.cumsum([p.size // 2 for p in pairs])
        flat = np.concatenate(pairs).reshape(-1, 2)
        ordinals, tfs = flat[:, 0].copy(), flat[:, 1].copy()
    else:
        ordinals = tfs = np.zeros(0, dtype=np.int32)
    del acc, pairs

    meta = {
        "format_version": FORMAT_VERSION,
        "analyzer": ANALYZER_NAME,
        "stopwords_sha256": stopwords_digest() if analyzer.stopwords is not None else None,
        "input_sha256": documents_digest(documents),
    }
    return InvertedIndex([d.doc_id for d in documents], lengths, terms, offsets,
                         ordinals, tfs, meta)


# -- persistence --------------------------------------------------------------

def _section(tag: bytes, payload: bytes) -> bytes:
    return tag + struct.pack("<Q", len(payload)) + payload


def _gaps(index: InvertedIndex) -> np.ndarray:
    ords = index.ordinals.astype(np.int64)
    gaps = np.empty_like(ords)
    if ords.size:
        gaps[0] = ords[0]
        gaps[1:] = ords[1:] - ords[:-1]
        starts = index.offsets[:-1]
        starts = starts[starts < ords.size]
        gaps[starts] = ords[starts]
    return gaps


def persist_index(index: InvertedIndex, path: str | Path) -> None:
    """Write ``index`` to ``path``; identical indexes give identical bytes."""
    meta = dict(index.meta)
    meta.update(doc_count=index.doc_count, term_count=len(index.terms),
                posting_count=index.posting_count)
    body = b"".join([
        MAGIC,
        struct.pack("<I", FORMAT_VERSION),
        _section(b"META", json.dumps(meta, sort_keys=True).encode("utf-8")),
        _section(b"DOCI", "\n".join(index.doc_ids).encode("utf-8")),
        _section(b"DOCL", encode_varints(index.doc_lengths)),
        _section(b"TERM", "\n".join(index.terms).encode("utf-8")),
        _section(b"TDF_", encode_varints(np.diff(index.offsets))),
        _section(b"PORD", encode_varints(_gaps(index))),
        _section(b"PTF_", encode_varints(index.tfs)),
    ])
    data = body + _section(b"END_", hashlib.sha256(body).digest())
    tmp = Path(f"{path}.tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _read_sections(data: bytes) -> dict[bytes, memoryview]:
    if len(data) < len(MAGIC) + 4 or not data.startswith(MAGIC):
        raise IndexFormatError("not an index file (bad magic)")
    (version,) = struct.unpack_from("<I", data, len(MAGIC))
    if version != FORMAT_VERSION:
        raise IndexFormatError(
            f"index format version {version} is not supported (expected {FORMAT_VERSION})")
    view = memoryview(data)
    pos = len(MAGIC) + 4
    sections: dict[bytes, memoryview] = {}
    while pos < len(data):
        if pos + 12 > len(data):
            raise IndexFormatError("truncated index file (section header)")
        tag = bytes(view[pos:pos + 4])
        (length,) = struct.unpack_from("<Q", data, pos + 4)
        start = pos + 12
        if start + length > len(data):
            raise IndexFormatError(f"truncated index file (section {tag!r})")
        if tag == b"END_":
            if hashlib.sha256(view[:pos]).digest() != bytes(view[start:start + length]):
                raise IndexFormatError("index checksum mismatch")
            if start + length != len(data):
                raise IndexFormatError("trailing bytes after end section")
            sections[tag] = view[start:start + length]
            return sections
        sections[tag] = view[start:start + length]
        pos = start + length
    raise IndexFormatError("truncated index file (no end section)")


def load_index(path: str | Path) -> InvertedIndex:
    data = Path(path).read_bytes()
    s = _read_sections(data)
    try:
        meta = json.loads(bytes(s[b"META"]).decode("utf-8"))
        doc_blob = bytes(s[b"DOCI"]).decode("utf-8")
        term_blob = bytes(s[b"TERM"]).decode("utf-8")
        doc_ids = doc_blob.split("\n") if meta["doc_count"] else []
        terms = term_blob.split("\n") if meta["term_count"] else []
        lengths = decode_varints(s[b"DOCL"])
        dfs = decode_varints(s[b"TDF_"])
        gaps = decode_varints(s[b"PORD"])
        tfs = decode_varints(s[b"PTF_"])
    except KeyError as exc:
        raise IndexFormatError(f"missing section {exc}") from None
    if not (len(doc_ids) == lengths.size == meta["doc_count"]
            and len(terms) == dfs.size == meta["term_count"]
            and gaps.size == tfs.size == meta["posting_count"]
            and int(dfs.sum()) == gaps.size):
        raise IndexFormatError("section sizes disagree with the header")
    offsets = np.zeros(len(terms) + 1, dtype=np.int64)
    np.cumsum(dfs, out=offsets[1:])
    running = np.cumsum(gaps)
    base = np.zeros(len(terms), dtype=np.int64)
    nonempty_start = offsets[:-1] > 0
    base[nonempty_start] = running[offsets[:-1][nonempty_start] - 1]
    ordinals = running - np.repeat(base, dfs)
    meta = {k: meta[k] for k in ("format_version", "analyzer", "stopwords_sha256", "input_sha256")}
    return InvertedIndex(doc_ids, lengths, terms, offsets, ordinals, tfs, meta)
