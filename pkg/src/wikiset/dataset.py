"""Building an ad-hoc retrieval dataset from articles.

Each article gives one document (body minus title line and first sentence)
and one candidate query (its cleaned title, or its cleaned first sentence).
Relevance comes from first-sentence links: the query's own article is graded
2, and every article whose first sentence links to the query's article is
graded 1. Everything else is implicitly 0 and is never written out.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import json
import logging
import math
import random
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from .ingest import (
    ArticleRecord,
    EmptyBody,
    _split_first_sentence,
    extract_anchors,
    record_to_json,
)
from .textproc import clean_text

__all__ = [
    "SPLITS",
    "ConfigError",
    "DatasetBundle",
    "DatasetConfig",
    "DatasetStats",
    "Document",
    "Query",
    "QuerySource",
    "RelevanceJudgment",
    "TopicLinkGraph",
    "build_dataset",
    "build_documents",
    "build_link_graph",
    "build_qrels",
    "build_queries",
    "dataset_stats",
    "id_sort_key",
    "load_bundle",
    "read_qrels",
    "select_queries",
    "split_queries",
    "write_bundle",
]

log = logging.getLogger(__name__)

SPLITS = ("training", "validation", "test")
MANIFEST_VERSION = 1


class ConfigError(ValueError):
    pass


class QuerySource(str, enum.Enum):
    TITLE = "title"
    FIRST_SENTENCE = "first-sentence"


class Document(NamedTuple):
    doc_id: str
    text: str


class Query(NamedTuple):
    query_id: str
    text: str
    source_mode: QuerySource = QuerySource.TITLE


class RelevanceJudgment(NamedTuple):
    query_id: str
    doc_id: str
    grade: int


def id_sort_key(article_id: str) -> tuple:
    """Numeric ids in numeric order, then any other ids as strings."""
    if article_id.isdigit():
        return (0, int(article_id), article_id)
    return (1, 0, article_id)


def _normalize_title(title: str) -> str:
    return " ".join(title.replace("_", " ").split())


def _fold_first(title: str) -> str:
    return title[:1].upper() + title[1:]


class _Article(NamedTuple):
    record: ArticleRecord
    sentence: str | None  # None when the body is empty
    remainder: str


def _parse(records: Iterable[ArticleRecord]) -> list[_Article]:
    parsed = []
    for r in records:
        try:
            sentence, rest = _split_first_sentence(r)
        except EmptyBody:
            parsed.append(_Article(r, None, ""))
        else:
            parsed.append(_Article(r, sentence, rest))
    parsed.sort(key=lambda a: id_sort_key(a.record.id))
    return parsed


@dataclass
class TopicLinkGraph:
    """Article id -> ids of articles its first sentence links to."""

    edges: dict[str, set[str]] = field(default_factory=dict)
    unresolved: int = 0
    duplicate_titles: list[str] = field(default_factory=list)

    def incoming(self) -> dict[str, set[str]]:
        inv: dict[str, set[str]] = defaultdict(set)
        for src, targets in self.edges.items():
            for dst in targets:
                inv[dst].add(src)
        return inv

    @property
    def edge_count(self) -> int:
        return sum(len(t) for t in self.edges.values())


class _TitleResolver:
    def __init__(self, articles: Sequence[_Article]):
        self.exact: dict[str, str] = {}
        self.folded: dict[str, str] = {}
        self.duplicates: list[str] = []
        for a in articles:
            title = _normalize_title(a.record.title)
            if title in self.exact:
                log.warning(
                    "duplicate title %r: article %s excluded from link resolution",
                    title, a.record.id,
                )
                self.duplicates.append(a.record.id)
                continue
            self.exact[title] = a.record.id
            self.folded.setdefault(_fold_first(title), a.record.id)

    def resolve(self, target: str) -> str | None:
        target = _normalize_title(target.split("#", 1)[0])
        if not target:
            return None
        hit = self.exact.get(target)
        if hit is None:
            hit = self.folded.get(_fold_first(target))
        return hit


def _link_graph(articles: Sequence[_Article]) -> TopicLinkGraph:
    resolver = _TitleResolver(articles)
    graph = TopicLinkGraph(duplicate_titles=resolver.duplicates)
    for a in articles:
        targets: set[str] = set()
        if a.sentence is not None:
            for anchor in extract_anchors(a.sentence):
                dst = resolver.resolve(anchor.target)
                if dst is None:
                    graph.unresolved += 1
                else:
                    targets.add(dst)
        graph.edges[a.record.id] = targets
    return graph


def build_link_graph(records: Iterable[ArticleRecord]) -> TopicLinkGraph:
    """Resolve first-sentence anchors against article titles.

    Matching is exact after whitespace/underscore normalization, with a
    fallback that ignores the case of the first character. Section fragments
    (``#...``) are dropped. Of two articles with the same title, the one
    with the larger id is left out of resolution.
    """
    return _link_graph(_parse(records))


def _documents(articles: Sequence[_Article], min_doc_tokens: int, lowercase: bool,
               tally: dict[str, int]) -> list[Document]:
    docs = []
    for a in articles:
        if a.sentence is None:
            tally["empty_body"] += 1
            continue
        text = clean_text(a.remainder, lowercase)
        n_tokens = len(text.split())
        if n_tokens == 0 or n_tokens < min_doc_tokens:
            tally["short_document"] += 1
            continue
        docs.append(Document(a.record.id, text))
    return docs


def build_documents(records: Iterable[ArticleRecord], min_doc_tokens: int = 10,
                    lowercase: bool = True) -> list[Document]:
    """Documents in article-id order; empty or short bodies are left out."""
    return _documents(_parse(records), min_doc_tokens, lowercase, defaultdict(int))


def _queries(articles: Sequence[_Article], mode: QuerySource, max_query_words: int,
             lowercase: bool, tally: dict[str, int]) -> list[Query]:
    mode = QuerySource(mode)
    seen: set[str] = set()
    queries = []
    for a in articles:
        if mode is QuerySource.TITLE:
            text = clean_text(a.record.title, lowercase)
        elif a.sentence is None:
            tally["query_empty"] += 1
            continue
        else:
            text = clean_text(a.sentence, lowercase)
        n_words = len(text.split())
        if n_words == 0:
            tally["query_empty"] += 1
        elif n_words > max_query_words:
            tally["query_too_long"] += 1
        elif text in seen:
            tally["query_duplicate"] += 1
        else:
            seen.add(text)
            queries.append(Query(a.record.id, text, mode))
    return queries


def build_queries(records: Iterable[ArticleRecord], mode: QuerySource | str = QuerySource.TITLE,
                  max_query_words: int = 10, lowercase: bool = True) -> list[Query]:
    """One query per article, from its title or its first sentence.

    Queries that clean to nothing or have more than ``max_query_words`` words
    are dropped (never truncated). Repeated query texts keep the lowest id.
    """
    return _queries(_parse(records), QuerySource(mode), max_query_words, lowercase,
                    defaultdict(int))


def build_qrels(queries: Iterable[Query], documents: Iterable[Document],
                graph: TopicLinkGraph) -> list[RelevanceJudgment]:
    """Positive judgments only: 2 for the query's own article, 1 for linkers."""
    doc_ids = {d.doc_id for d in documents}
    incoming = graph.incoming()
    qrels = []
    for q in sorted(queries, key=lambda q: id_sort_key(q.query_id)):
        if q.query_id in doc_ids:
            qrels.append(RelevanceJudgment(q.query_id, q.query_id, 2))
        for src in sorted(incoming.get(q.query_id, ()), key=id_sort_key):
            if src != q.query_id and src in doc_ids:
                qrels.append(RelevanceJudgment(q.query_id, src, 1))
    return qrels


def select_queries(queries: Iterable[Query], qrels: Iterable[RelevanceJudgment],
                   min_rel_docs: int = 5) -> tuple[list[Query], list[RelevanceJudgment]]:
    """Keep queries with at least ``min_rel_docs`` relevant documents.

    The grade-2 self document counts toward the minimum and must be present.
    Judgments of dropped queries are dropped too.
    """
    qrels = list(qrels)
    n_rel: dict[str, int] = defaultdict(int)
    has_self: set[str] = set()
    for j in qrels:
        if j.grade >= 1:
            n_rel[j.query_id] += 1
        if j.grade == 2:
            has_self.add(j.query_id)
    kept = [q for q in queries if q.query_id in has_self and n_rel[q.query_id] >= min_rel_docs]
    kept_ids = {q.query_id for q in kept}
    return kept, [j for j in qrels if j.query_id in kept_ids]


def _check_fractions(fractions: Sequence[float]) -> tuple[float, float, float]:
    if len(fractions) != 3:
        raise ConfigError(f"need three split fractions, got {len(fractions)}")
    if any(f < 0 for f in fractions):
        raise ConfigError(f"split fractions must be nonnegative: {tuple(fractions)}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must sum to 1, got {sum(fractions):.12g}")
    return tuple(float(f) for f in fractions)  # type: ignore[return-value]


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_queries(queries: Iterable[Query], fractions: Sequence[float] = (0.8, 0.1, 0.1),
                  seed: int = 0) -> dict[str, list[Query]]:
    """Shuffle under ``seed`` and cut into training/validation/test.

    Validation and test sizes are ``round(f * n)`` (half up); training takes
    the rest. Input order does not matter: queries are sorted by id first.
    """
    _, f_valid, f_test = _check_fractions(fractions)
    ordered = sorted(queries, key=lambda q: id_sort_key(q.query_id))
    random.Random(seed).shuffle(ordered)
    n = len(ordered)
    n_valid = _round_half_up(f_valid * n)
    n_test = min(_round_half_up(f_test * n), n - n_valid)
    n_train = n - n_valid - n_test
    parts = (ordered[:n_train], ordered[n_train:n_train + n_valid], ordered[n_train + n_valid:])
    return {
        name: sorted(part, key=lambda q: id_sort_key(q.query_id))
        for name, part in zip(SPLITS, parts)
    }


@dataclass
class DatasetConfig:
    query_source: QuerySource = QuerySource.TITLE
    min_rel: int = 5
    max_query_words: int = 10
    min_doc_tokens: int = 10
    lowercase: bool = True
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0

    def __post_init__(self):
        try:
            self.query_source = QuerySource(self.query_source)
        except ValueError:
            raise ConfigError(f"unknown query source {self.query_source!r}") from None
        self.fractions = _check_fractions(tuple(self.fractions))
        if self.min_rel < 1:
            raise ConfigError("min_rel must be >= 1")
        if self.max_query_words < 1:
            raise ConfigError("max_query_words must be >= 1")
        if self.min_doc_tokens < 0:
            raise ConfigError("min_doc_tokens must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["query_source"] = self.query_source.value
        d["fractions"] = list(self.fractions)
        return d


@dataclass
class DatasetBundle:
    documents: list[Document]
    queries: dict[str, list[Query]]
    qrels: dict[str, list[RelevanceJudgment]]
    manifest: dict

    def all_queries(self) -> list[Query]:
        return [q for name in SPLITS for q in self.queries.get(name, [])]

    def all_qrels(self) -> list[RelevanceJudgment]:
        return [j for name in SPLITS for j in self.qrels.get(name, [])]


def build_dataset(records: Iterable[ArticleRecord], config: DatasetConfig | None = None) -> DatasetBundle:
    config = config or DatasetConfig()
    digest = hashlib.sha256()
    materialized = []
    for r in records:
        digest.update(record_to_json(r).encode("utf-8") + b"\n")
        materialized.append(r)
    articles = _parse(materialized)

    tally: dict[str, int] = defaultdict(int)
    graph = _link_graph(articles)
    documents = _documents(articles, config.min_doc_tokens, config.lowercase, tally)
    queries = _queries(articles, config.query_source, config.max_query_words,
                       config.lowercase, tally)
    qrels = build_qrels(queries, documents, graph)
    selected, qrels = select_queries(queries, qrels, config.min_rel)
    tally["query_min_rel"] = len(queries) - len(selected)
    tally["duplicate_title"] = len(graph.duplicate_titles)
    tally["unresolved_link"] = graph.unresolved

    splits = split_queries(selected, config.fractions, config.seed)
    by_query: dict[str, list[RelevanceJudgment]] = defaultdict(list)
    for j in qrels:
        by_query[j.query_id].append(j)
    split_qrels = {
        name: [j for q in splits[name] for j in by_query[q.query_id]] for name in SPLITS
    }

    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "config": config.to_dict(),
        "seed": config.seed,
        "input_sha256": digest.hexdigest(),
        "counts": {
            "articles": len(articles),
            "documents": len(documents),
            "link_edges": graph.edge_count,
            "queries_built": len(queries),
            "queries_selected": len(selected),
            "queries": {name: len(splits[name]) for name in SPLITS},
            "qrels": {name: len(split_qrels[name]) for name in SPLITS},
        },
        "exclusions": dict(sorted(tally.items())),
    }
    return DatasetBundle(documents, splits, split_qrels, manifest)


@dataclass
class DatasetStats:
    documents: int
    avg_document_length: float
    queries: int
    avg_query_length: float
    avg_relevant_per_query: float

    def format_table(self) -> str:
        rows = [
            ("Document count", f"{self.documents:,}"),
            ("Average document length", f"{self.avg_document_length:.2f}"),
            ("Query count", f"{self.queries:,}"),
            ("Average query length", f"{self.avg_query_length:.2f}"),
            ("Avg #d+/q", f"{self.avg_relevant_per_query:.2f}"),
        ]
        width = max(len(r[0]) for r in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def dataset_stats(bundle: DatasetBundle) -> DatasetStats:
    docs = bundle.documents
    queries = bundle.all_queries()
    n_rel = sum(1 for j in bundle.all_qrels() if j.grade >= 1)

    def mean(total: int, n: int) -> float:
        return total / n if n else 0.0

    return DatasetStats(
        documents=len(docs),
        avg_document_length=mean(sum(len(d.text.split()) for d in docs), len(docs)),
        queries=len(queries),
        avg_query_length=mean(sum(len(q.text.split()) for q in queries), len(queries)),
        avg_relevant_per_query=mean(n_rel, len(queries)),
    )


# -- on-disk layout ---------------------------------------------------------

def _write_csv(path: Path, header: tuple[str, str], rows: Iterable[tuple[str, str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)


def write_qrels(path: Path, qrels: Iterable[RelevanceJudgment]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for j in qrels:
            f.write(f"{j.query_id} 0 {j.doc_id} {j.grade}\n")


def read_qrels(path: str | Path) -> list[RelevanceJudgment]:
    """TREC qrels: ``<query_id> <iter> <doc_id> <grade>`` per line."""
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            out.append(RelevanceJudgment(parts[0], parts[2], int(parts[3])))
    return out


def write_bundle(bundle: DatasetBundle, out_dir: str | Path) -> Path:
    """Write documents.csv, <split>/queries.csv, <split>/qrels and manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "documents.csv", ("id_right", "text_right"),
               ((d.doc_id, d.text) for d in bundle.documents))
    for name in SPLITS:
        (out / name).mkdir(exist_ok=True)
        _write_csv(out / name / "queries.csv", ("id_left", "text_left"),
                   ((q.query_id, q.text) for q in bundle.queries.get(name, [])))
        write_qrels(out / name / "qrels", bundle.qrels.get(name, []))
    with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as f:
        json.dump(bundle.manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return out


def read_documents(path: str | Path) -> list[Document]:
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["id_right", "text_right"]:
            raise ValueError(f"{path}: unexpected header {header}")
        return [Document(row[0], row[1]) for row in reader]


def read_queries(path: str | Path, mode: QuerySource | str = QuerySource.TITLE) -> list[Query]:
    mode = QuerySource(mode)
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["id_left", "text_left"]:
            raise ValueError(f"{path}: unexpected header {header}")
        return [Query(row[0], row[1], mode) for row in reader]


def load_bundle(path: str | Path) -> DatasetBundle:
    root = Path(path)
    manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    mode = manifest.get("config", {}).get("query_source", QuerySource.TITLE.value)
    return DatasetBundle(
        documents=read_documents(root / "documents.csv"),
        queries={name: read_queries(root / name / "queries.csv", mode) for name in SPLITS},
        qrels={name: read_qrels(root / name / "qrels") for name in SPLITS},
        manifest=manifest,
    )
