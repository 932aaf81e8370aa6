"""Reading extracted Wikipedia articles.

The canonical input is JSON lines, one article per line, with string fields
``id``, ``url``, ``title`` and ``text``. ``text`` starts with the title, a
blank line, then the body; internal links are kept as
``<a href="TARGET">ANCHOR</a>`` with a percent-encoded target.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, NamedTuple
from urllib.parse import unquote

__all__ = [
    "AnchorSpan",
    "ArticleRecord",
    "EmptyBody",
    "FirstSentence",
    "IngestError",
    "IngestReport",
    "RecordError",
    "body_after_first_sentence",
    "extract_anchors",
    "first_paragraph",
    "first_sentence",
    "normalize_target",
    "parse_record_stream",
    "record_to_json",
]

log = logging.getLogger(__name__)

REQUIRED_FIELDS = ("id", "url", "title", "text")


class IngestError(Exception):
    """Fatal: the input stream itself cannot be read."""


class RecordError(ValueError):
    """One record is unusable; ingestion skips it and carries on."""


class EmptyBody(ValueError):
    """The article has nothing after its title line."""


@dataclass(frozen=True)
class ArticleRecord:
    id: str
    url: str
    title: str
    text: str

    def validate(self) -> None:
        for name in REQUIRED_FIELDS:
            if not isinstance(getattr(self, name), str):
                raise RecordError(f"field {name!r} must be a string")
        if not self.id.strip():
            raise RecordError("empty id")
        if not self.title.strip():
            raise RecordError("empty title")
        head = self.text.split("\n\n", 1)[0]
        if head.strip() != self.title.strip():
            raise RecordError(
                f"text does not start with the title line (got {head[:60]!r})"
            )

    @property
    def body(self) -> str:
        parts = self.text.split("\n\n", 1)
        return parts[1].lstrip() if len(parts) == 2 else ""


class AnchorSpan(NamedTuple):
    target: str
    anchor_text: str
    span: tuple[int, int]
    """Character offsets ``[start, end)`` of the whole element in the owning text."""


class FirstSentence(NamedTuple):
    text: str
    anchors: list[AnchorSpan]


@dataclass
class IngestReport:
    records: int = 0
    errors: list[tuple[int, str]] = field(default_factory=list)

    @property
    def skipped(self) -> int:
        return len(self.errors)


def record_to_json(record: ArticleRecord) -> str:
    return json.dumps(
        {"id": record.id, "url": record.url, "title": record.title, "text": record.text},
        ensure_ascii=False,
    )


def parse_record_stream(
    stream: IO[bytes] | Iterable[bytes | str], report: IngestReport | None = None
) -> Iterator[ArticleRecord]:
    """Yield validated records from a JSON-lines stream, one line at a time.

    Bad lines are logged, appended to ``report.errors`` as ``(line_no, msg)``
    and skipped. Blank lines are ignored.
    """
    if report is None:
        report = IngestReport()
    seen: set[str] = set()
    lines = iter(stream)
    lineno = 0
    while True:
        try:
            raw = next(lines)
        except StopIteration:
            return
        except (OSError, ValueError) as exc:
            raise IngestError(f"cannot read input after line {lineno}: {exc}") from exc
        lineno += 1
        try:
            line = raw.decode("utf-8") if isinstance(raw, bytes) else raw
        except UnicodeDecodeError as exc:
            _skip(report, lineno, f"invalid UTF-8: {exc}")
            continue
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            _skip(report, lineno, f"malformed JSON: {exc}")
            continue
        if not isinstance(obj, dict):
            _skip(report, lineno, "line is not a JSON object")
            continue
        missing = [k for k in REQUIRED_FIELDS if k not in obj]
        if missing:
            _skip(report, lineno, f"missing field(s): {', '.join(missing)}")
            continue
        record = ArticleRecord(*(obj[k] for k in REQUIRED_FIELDS))
        try:
            record.validate()
        except RecordError as exc:
            _skip(report, lineno, str(exc))
            continue
        if record.id in seen:
            _skip(report, lineno, f"duplicate id {record.id!r}")
            continue
        seen.add(record.id)
        report.records += 1
        yield record


def _skip(report: IngestReport, lineno: int, message: str) -> None:
    log.warning("line %d skipped: %s", lineno, message)
    report.errors.append((lineno, message))


class _Anchor(NamedTuple):
    start: int
    end: int
    inner_start: int
    inner_end: int
    href: str


def _scan_anchors(text: str) -> list[_Anchor]:
    found = []
    n = len(text)
    pos = text.find("<a", 0)
    while pos != -1:
        anchor = _parse_anchor_at(text, pos, n)
        if anchor is None:
            pos = text.find("<a", pos + 2)
        else:
            found.append(anchor)
            pos = text.find("<a", anchor.end)
    return found


def _parse_anchor_at(text: str, pos: int, n: int) -> _Anchor | None:
    i = pos + 2
    if i >= n or text[i] not in " \t":
        return None
    while i < n and text[i] in " \t":
        i += 1
    if not text.startswith('href="', i):
        return None
    i += 6
    close_quote = i
    while close_quote < n and text[close_quote] not in '"<>\n':
        close_quote += 1
    if close_quote >= n or text[close_quote] != '"':
        return None
    href = text[i:close_quote]
    i = close_quote + 1
    while i < n and text[i] in " \t":
        i += 1
    if i >= n or text[i] != ">":
        return None
    inner_start = i + 1
    j = inner_start
    while j < n:
        c = text[j]
        if c == "\n":
            return None
        if c == "<":
            if text.startswith("</a>", j):
                return _Anchor(pos, j + 4, inner_start, j, href)
            if text.startswith("<a", j) and j + 2 < n and text[j + 2] in " \t":
                return None
        j += 1
    return None


def normalize_target(target: str) -> str:
    """Percent-decode a link target and turn underscores into spaces."""
    return " ".join(unquote(target).replace("_", " ").split())


def extract_anchors(text: str) -> list[AnchorSpan]:
    """Every well-formed ``<a href="...">...</a>`` element in order.

    Malformed or unclosed elements, and elements whose decoded target is
    empty, are treated as plain text.
    """
    spans = []
    for a in _scan_anchors(text):
        target = normalize_target(a.href)
        if target:
            spans.append(AnchorSpan(target, text[a.inner_start:a.inner_end], (a.start, a.end)))
    return spans


def first_paragraph(record: ArticleRecord) -> str:
    return record.body.split("\n", 1)[0]


def _sentence_cut(paragraph: str) -> int:
    anchors = _scan_anchors(paragraph)
    n = len(paragraph)
    # character positions covered by tag syntax, start -> end of the tag
    tags: dict[int, int] = {}
    for a in anchors:
        tags[a.start] = a.inner_start
        tags[a.inner_end] = a.end

    def skip_tags(k: int) -> int:
        while k in tags:
            k = tags[k]
        return k

    i = skip_tags(0)
    while i < n:
        if paragraph[i] in ".!?":
            j = skip_tags(i + 1)
            if j >= n:
                return n
            if paragraph[j].isspace():
                k = j
                while k < n and (paragraph[k].isspace() or k in tags):
                    k = tags[k] if k in tags else k + 1
                if k >= n or not paragraph[k].islower():
                    cut = i + 1
                    for a in anchors:
                        if a.start < cut < a.end:
                            cut = a.end
                            break
                    return cut
            i = j
            continue
        i = skip_tags(i + 1)
    return n


def _split_first_sentence(record: ArticleRecord) -> tuple[str, str]:
    body = record.body
    if not body.strip():
        raise EmptyBody(f"article {record.id!r} has an empty body")
    paragraph, sep, rest = body.partition("\n")
    cut = _sentence_cut(paragraph)
    return paragraph[:cut], paragraph[cut:] + sep + rest


def first_sentence(record: ArticleRecord) -> FirstSentence:
    """First sentence of the body with the anchors inside it.

    A sentence ends at ``.``, ``!`` or ``?`` followed by whitespace and a
    character that is not lowercase, or at the end of the first paragraph.
    Tag syntax of anchor elements is skipped while scanning.
    """
    sentence, _ = _split_first_sentence(record)
    return FirstSentence(sentence, extract_anchors(sentence))


def body_after_first_sentence(record: ArticleRecord) -> str:
    """The body with its first sentence removed."""
    return _split_first_sentence(record)[1]
