"""Command-line entry point: ``wikiset <command> ...``.

Exit status is 0 on success, 1 on a fatal error and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import gzip
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Iterator

from . import __version__
from .bm25 import Bm25Ranker, idf, read_run, write_run
from .config import PipelineConfig
from .dataset import (
    SPLITS,
    ConfigError,
    build_dataset,
    dataset_stats,
    load_bundle,
    read_documents,
    read_qrels,
    read_queries,
    write_bundle,
)
from .evaluation import (
    EvaluationError,
    compare_runs,
    evaluate_run,
    latex_table,
    qrels_by_query,
    write_summary,
)
from .index import IndexFormatError, build_index, load_index, persist_index
from .ingest import ArticleRecord, IngestError, IngestReport, parse_record_stream, record_to_json
from .wikitext import is_redirect, iter_wikitext_dir, iter_wikitext_tsv, wikitext_to_record

log = logging.getLogger("wikiset")

FATAL_ERRORS = (OSError, ValueError, IngestError, IndexFormatError, ConfigError, EvaluationError)


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def tree_sha256(root: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(q for q in root.rglob("*") if q.is_file()):
        h.update(str(p.relative_to(root)).encode("utf-8") + b"\0")
        h.update(file_sha256(p).encode("ascii"))
    return h.hexdigest()


def input_sha256(path: str | Path) -> str:
    path = Path(path)
    return tree_sha256(path) if path.is_dir() else file_sha256(path)


def write_manifest(path: Path, doc: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def _open_text(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, encoding="utf-8")


def iter_wikitext_records(path: str | Path, tally: dict) -> Iterator[ArticleRecord]:
    """Records from a wikitext directory or TSV stream; redirects are skipped."""
    path = Path(path)
    if path.is_dir():
        pages = iter_wikitext_dir(path)
    else:
        pages = iter_wikitext_tsv(_open_text(path))
    for page_id, title, text in pages:
        if is_redirect(text):
            tally["redirects"] = tally.get("redirects", 0) + 1
            continue
        warnings: list[str] = []
        record = wikitext_to_record(page_id, title, text, warnings)
        tally["warnings"] = tally.get("warnings", 0) + len(warnings)
        yield record


def iter_jsonl_records(path: str | Path, report: IngestReport) -> Iterator[ArticleRecord]:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as f:
        yield from parse_record_stream(f, report)


# -- commands -----------------------------------------------------------------

def cmd_extract(args) -> int:
    src = Path(args.input)
    out = Path(args.output)
    if not src.exists():
        raise FileNotFoundError(f"input not found: {src}")
    tally: dict = {}
    n = 0
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="\n") as f:
        for record in iter_wikitext_records(src, tally):
            f.write(record_to_json(record) + "\n")
            n += 1
    write_manifest(Path(f"{out}.manifest.json"), {
        "command": "extract",
        "input": str(src),
        "input_sha256": input_sha256(src),
        "output_sha256": file_sha256(out),
        "counts": {"articles": n, **tally},
    })
    print(f"wrote {n} articles to {out}", file=sys.stderr)
    return 0


def _pipeline_config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_toml(args.config) if getattr(args, "config", None) else PipelineConfig()
    overrides = {k: getattr(args, k, None) for k in (
        "query_source", "min_rel", "max_query_words", "min_doc_tokens", "seed",
        "k1", "b", "top_k", "alpha", "bonferroni_m", "threads")}
    overrides["input_path"] = getattr(args, "input", None)
    overrides["input_format"] = getattr(args, "format", None)
    overrides["output_dir"] = getattr(args, "output_dir", None)
    if getattr(args, "no_lowercase", False):
        overrides["lowercase"] = False
    if getattr(args, "fractions", None):
        try:
            overrides["fractions"] = tuple(float(x) for x in args.fractions.split(","))
        except ValueError:
            raise ConfigError(f"bad --fractions value {args.fractions!r}") from None
    return cfg.with_overrides(**overrides)


def cmd_build(args) -> int:
    cfg = _pipeline_config(args)
    if not cfg.input_path or not cfg.output_dir:
        raise ConfigError("build needs an input path and an output directory")
    src = Path(cfg.input_path)
    if not src.exists():
        raise FileNotFoundError(f"input not found: {src}")
    report = IngestReport()
    tally: dict = {}
    if cfg.input_format == "jsonl":
        records = iter_jsonl_records(src, report)
    else:
        records = iter_wikitext_records(src, tally)
    bundle = build_dataset(records, cfg.dataset)
    bundle.manifest["pipeline"] = cfg.to_dict()
    bundle.manifest["input_file_sha256"] = input_sha256(src)
    bundle.manifest["ingest"] = {"skipped_lines": report.skipped, **tally}
    write_bundle(bundle, cfg.output_dir)
    if report.skipped:
        print(f"{report.skipped} input line(s) skipped", file=sys.stderr)
    print(dataset_stats(bundle).format_table())
    return 0


def cmd_stats(args) -> int:
    print(dataset_stats(load_bundle(args.bundle)).format_table())
    return 0


def _documents_path(src: Path) -> Path:
    return src / "documents.csv" if src.is_dir() else src


def cmd_index(args) -> int:
    cfg = _pipeline_config(args)
    docs_path = _documents_path(Path(args.documents))
    index = build_index(read_documents(docs_path), threads=cfg.threads)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    persist_index(index, out)
    write_manifest(Path(f"{out}.manifest.json"), {
        "command": "index",
        "documents": str(docs_path),
        "documents_file_sha256": file_sha256(docs_path),
        "index_sha256": file_sha256(out),
        "meta": index.meta,
        "counts": {"documents": index.doc_count, "terms": len(index.terms),
                   "postings": index.posting_count},
    })
    print(f"indexed {index.doc_count} documents, {len(index.terms)} terms", file=sys.stderr)
    return 0


def cmd_index_inspect(args) -> int:
    index = load_index(args.index)
    out = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
    try:
        out.write("term\tdf\tcf\tidf\n")
        for term in index.terms:
            out.write(f"{term}\t{index.document_frequency(term)}\t"
                      f"{index.collection_frequency(term)}\t{idf(index, term):.6f}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_rank(args) -> int:
    cfg = _pipeline_config(args)
    if args.queries:
        queries_path = Path(args.queries)
    elif args.bundle:
        queries_path = Path(args.bundle) / args.split / "queries.csv"
    else:
        raise ConfigError("rank needs --queries or --bundle")
    index = load_index(args.index)
    queries = read_queries(queries_path)
    ranker = Bm25Ranker(index, cfg.bm25)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="\n") as f:
        for q in queries:
            write_run(ranker.rank(q.query_id, q.text), f, args.tag)
    write_manifest(Path(f"{out}.manifest.json"), {
        "command": "rank",
        "index_sha256": file_sha256(args.index),
        "queries": str(queries_path),
        "queries_sha256": file_sha256(queries_path),
        "bm25": {"k1": cfg.bm25.k1, "b": cfg.bm25.b, "top_k": cfg.bm25.top_k},
        "tag": args.tag,
        "run_sha256": file_sha256(out),
    })
    return 0


def _run_name(path: str) -> str:
    return Path(path).name.split(".")[0]


def cmd_eval(args) -> int:
    cfg = _pipeline_config(args)
    qrels = qrels_by_query(read_qrels(args.qrels))
    paths = [args.baseline] + list(args.run or [])
    names = [_run_name(p) for p in paths]
    if len(set(names)) != len(names):
        raise ConfigError(f"run names must be distinct, got {names}")
    evaluations = {}
    for name, path in zip(names, paths):
        with open(path, encoding="utf-8") as f:
            evaluations[name] = evaluate_run(read_run(f), qrels)
    base_name = names[0]
    systems = [(n, evaluations[n]) for n in names[1:]]
    m = cfg.eval.bonferroni_m or None
    verdicts = compare_runs(evaluations[base_name], dict(systems), cfg.eval.alpha, m) if systems else {}
    table = latex_table((base_name, evaluations[base_name]), systems, cfg.eval.alpha, m)

    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, ev in evaluations.items():
        with open(out / f"{name}.per_query.tsv", "w", encoding="utf-8", newline="\n") as f:
            ev.write_tsv(f)
    (out / "table.tex").write_text(table, encoding="utf-8")
    write_summary(out / "summary.json", evaluations, verdicts, {
        "baseline": base_name,
        "alpha": cfg.eval.alpha,
        "bonferroni_m": m if m is not None else max(1, len(systems) * 8),
        "qrels_sha256": file_sha256(args.qrels),
        "runs_sha256": {n: file_sha256(p) for n, p in zip(names, paths)},
    })
    sys.stdout.write(table)
    return 0


# -- argument parsing ---------------------------------------------------------

def _add_threads(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threads", type=int, help="worker cap, 0 = all cores (default: $WIKISET_THREADS or 1)")


def _add_bm25(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k1", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--top-k", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wikiset", description="Wikipedia retrieval dataset builder, BM25 ranker and evaluator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="wikitext (directory or TSV) to JSON lines")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("build", help="build documents, queries, qrels and splits")
    p.add_argument("--config")
    p.add_argument("-i", "--input")
    p.add_argument("--format", choices=("jsonl", "wikitext"))
    p.add_argument("-o", "--output-dir")
    p.add_argument("--query-source", choices=("title", "first-sentence"))
    p.add_argument("--min-rel", type=int)
    p.add_argument("--max-query-words", type=int)
    p.add_argument("--min-doc-tokens", type=int)
    p.add_argument("--no-lowercase", action="store_true")
    p.add_argument("--fractions", help="train,validation,test e.g. 0.8,0.1,0.1")
    p.add_argument("--seed", type=int)
    _add_threads(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("stats", help="dataset statistics of a built bundle")
    p.add_argument("bundle")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("index", help="build a BM25 index (or: index inspect INDEX)")
    p.add_argument("documents", help="bundle directory or documents.csv")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--config")
    _add_threads(p)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("index-inspect", help="per-term df, cf and idf of an index (alias: index inspect)")
    p.add_argument("index")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_index_inspect)

    p = sub.add_parser("rank", help="BM25 top-k run for a query file")
    p.add_argument("--index", required=True)
    p.add_argument("--queries")
    p.add_argument("--bundle")
    p.add_argument("--split", choices=SPLITS, default="test")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--tag", default="bm25")
    p.add_argument("--config")
    _add_bm25(p)
    _add_threads(p)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("eval", help="metrics, significance and a LaTeX table")
    p.add_argument("--qrels", required=True)
    p.add_argument("--baseline", required=True)
    p.add_argument("--run", action="append", help="system run, repeatable")
    p.add_argument("-o", "--output-dir", required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--bonferroni-m", type=int)
    p.add_argument("--config")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv[:2] == ["index", "inspect"]:
        argv = ["index-inspect"] + argv[2:]
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except FATAL_ERRORS as exc:
        print(f"wikiset {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
