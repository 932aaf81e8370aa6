"""A small wikitext-to-record converter.

Handles only what dataset construction needs: internal links become anchor
elements, and templates, tables, references, comments, HTML tags, headings
markers, list markers and bold/italic quotes are stripped. Everything else
passes through as text. Real dumps should go through a dedicated extractor;
this exists so small fixtures and dump slices can be turned into the JSON-lines
format without one.
"""

from __future__ import annotations

import html
import logging
import re
from pathlib import Path
from typing import IO, Iterable, Iterator
from urllib.parse import quote

from .ingest import ArticleRecord

__all__ = [
    "is_redirect",
    "iter_wikitext_dir",
    "iter_wikitext_tsv",
    "wikitext_to_record",
]

log = logging.getLogger(__name__)

URL_TEMPLATE = "https://en.wikipedia.org/wiki?curid={id}"

_COMMENT = re.compile(r"<!--.*?(?:-->|\Z)", re.DOTALL)
_REF = re.compile(r"<ref\b[^>]*/\s*>|<ref\b[^>]*>.*?</ref\s*>", re.DOTALL | re.IGNORECASE)
_TAG = re.compile(r"</?[A-Za-z][A-Za-z0-9]*\b[^<>]*/?>")
_EXT_LINK = re.compile(r"\[(?:https?:|ftp:)?//[^\s\]]*(?:\s+([^\]]*))?\]")
_HEADING = re.compile(r"^(=+)\s*(.*?)\s*\1\s*$")
_LIST_MARK = re.compile(r"^[*#:;]+\s*")
_QUOTES = re.compile(r"'{2,}")
_MAGIC = re.compile(r"__[A-Z]+__")
_SPACES = re.compile(r"[ \t\u00a0]+")

# link prefixes that are not article links
_SKIP_NAMESPACES = {
    "file", "image", "category", "media", "wikipedia", "wp", "template",
    "help", "portal", "special", "user", "talk", "wiktionary", "wikt",
    "s", "commons", "meta", "draft", "module",
}


def is_redirect(wikitext: str) -> bool:
    return wikitext.lstrip()[:9].upper() == "#REDIRECT"


def _strip_nested(text: str, open_: str, close: str, warnings: list[str], what: str) -> str:
    """Remove balanced ``open_ ... close`` blocks, nesting allowed.

    An unclosed block is removed up to the end of its paragraph.
    """
    out = []
    i = 0
    n = len(text)
    while True:
        start = text.find(open_, i)
        if start == -1:
            out.append(text[i:])
            break
        out.append(text[i:start])
        depth = 0
        j = start
        while j < n:
            if text.startswith(open_, j):
                depth += 1
                j += len(open_)
            elif text.startswith(close, j):
                depth -= 1
                j += len(close)
                if depth == 0:
                    break
            else:
                j += 1
        if depth != 0:
            para_end = text.find("\n\n", start)
            para_end = n if para_end == -1 else para_end
            warnings.append(f"unbalanced {what} at offset {start}; stripped to end of paragraph")
            i = para_end
        else:
            i = j
    return "".join(out)


def _render_link(inner: str) -> str:
    target, sep, anchor = inner.partition("|")
    target = target.strip()
    if ":" in target:
        prefix = target.lstrip(":").split(":", 1)[0].strip().lower()
        interlanguage = len(prefix) == 2 and prefix.isalpha() and not target.startswith(":")
        if prefix in _SKIP_NAMESPACES or interlanguage:
            return ""
    target = target.lstrip(":")
    if sep:
        # [[A|b|c]] keeps the last part, as MediaWiki does for file links
        anchor = anchor.rsplit("|", 1)[-1].strip() or target
    else:
        anchor = target
    anchor = " ".join(anchor.split())
    if not target:
        return anchor
    return f'<a href="{quote(target)}">{anchor}</a>'


def _convert_links(text: str, warnings: list[str]) -> str:
    out = []
    i = 0
    n = len(text)
    while True:
        start = text.find("[[", i)
        if start == -1:
            out.append(text[i:])
            break
        out.append(text[i:start])
        depth = 0
        j = start
        while j < n:
            if text.startswith("[[", j):
                depth += 1
                j += 2
            elif text.startswith("]]", j):
                depth -= 1
                j += 2
                if depth == 0:
                    break
            else:
                j += 1
        if depth != 0:
            warnings.append(f"unclosed link at offset {start}")
            out.append(text[start + 2:])
            break
        inner = text[start + 2:j - 2]
        if "[[" in inner:
            # nested links only occur inside file/image captions, which are dropped
            out.append(_render_link(inner) if ":" not in inner.split("|", 1)[0] else "")
        else:
            out.append(_render_link(inner))
        i = j
    return "".join(out)


def wikitext_to_record(
    id: str, title: str, wikitext: str, warnings: list[str] | None = None
) -> ArticleRecord:
    """Convert one article's wikitext to a record in the JSON-lines text format.

    >>> wikitext_to_record("1", "T", "{{Infobox|x=1}}Lead sentence.").text
    'T\\n\\nLead sentence.'
    """
    local: list[str] = []
    text = _COMMENT.sub("", wikitext)
    text = _REF.sub("", text)
    text = _strip_nested(text, "{{", "}}", local, "template")
    text = _strip_nested(text, "{|", "|}", local, "table")
    text = _TAG.sub("", text)
    text = html.unescape(text)
    text = _convert_links(text, local)
    text = _EXT_LINK.sub(lambda m: m.group(1) or "", text)
    text = _MAGIC.sub("", text)
    text = _QUOTES.sub("", text)

    lines = []
    for line in text.split("\n"):
        heading = _HEADING.match(line.strip())
        if heading:
            line = heading.group(2)
        line = _LIST_MARK.sub("", line.strip())
        line = _SPACES.sub(" ", line).strip()
        if line:
            lines.append(line)

    for w in local:
        log.warning("%s (%s): %s", title, id, w)
    if warnings is not None:
        warnings.extend(local)
    return ArticleRecord(
        id=str(id),
        url=URL_TEMPLATE.format(id=id),
        title=title,
        text=f"{title}\n\n" + "\n".join(lines),
    )


def _unescape_field(value: str) -> str:
    return re.sub(r"\\(.)", lambda m: {"n": "\n", "t": "\t"}.get(m.group(1), m.group(1)), value)


def iter_wikitext_tsv(lines: IO[str] | Iterable[str]) -> Iterator[tuple[str, str, str]]:
    """Yield ``(id, title, wikitext)`` from a tab-separated stream.

    Rows are ``title<TAB>wikitext`` (id = line number) or
    ``id<TAB>title<TAB>wikitext``. In the wikitext column ``\\n``, ``\\t`` and
    ``\\\\`` are escapes for newline, tab and backslash.
    """
    for lineno, line in enumerate(lines, 1):
        line = line.rstrip("\r\n")
        if not line:
            continue
        cols = line.split("\t")
        if len(cols) == 2:
            yield str(lineno), cols[0], _unescape_field(cols[1])
        elif len(cols) == 3:
            yield cols[0], cols[1], _unescape_field(cols[2])
        else:
            raise ValueError(f"line {lineno}: expected 2 or 3 tab-separated columns, got {len(cols)}")


def iter_wikitext_dir(root: str | Path) -> Iterator[tuple[str, str, str]]:
    """One article per file; title is the file stem with ``_`` read as space.

    Files are taken in sorted path order and numbered from 1.
    """
    root = Path(root)
    if not root.is_dir():
        raise NotADirectoryError(str(root))
    paths = sorted(p for p in root.rglob("*") if p.is_file())
    for n, path in enumerate(paths, 1):
        title = path.stem.replace("_", " ").strip()
        yield str(n), title, path.read_text(encoding="utf-8")
