import io
import json
import re

import pytest
from hypothesis import given, strategies as st

from wikiset.ingest import (
    ArticleRecord,
    EmptyBody,
    IngestError,
    IngestReport,
    RecordError,
    body_after_first_sentence,
    extract_anchors,
    first_paragraph,
    first_sentence,
    normalize_target,
    parse_record_stream,
    record_to_json,
)

from helpers import make_record

AUTISM = {
    "id": "25",
    "url": "https://en.wikipedia.org/wiki?curid=25",
    "title": "Autism",
    "text": 'Autism\n\nAutism is a <a href="developmental%20disorder">developmental disorder</a> '
            "characterized by troubles. Parents usually notice signs.",
}


def stream(*objs) -> io.BytesIO:
    lines = [o if isinstance(o, (str, bytes)) else json.dumps(o) for o in objs]
    raw = b"".join((l if isinstance(l, bytes) else l.encode("utf-8")) + b"\n" for l in lines)
    return io.BytesIO(raw)


def test_parse_record():
    records = list(parse_record_stream(stream(AUTISM)))
    assert records == [ArticleRecord("25", AUTISM["url"], "Autism", AUTISM["text"])]


def test_empty_stream():
    report = IngestReport()
    assert list(parse_record_stream(io.BytesIO(b""), report)) == []
    assert report.skipped == 0 and report.records == 0


def test_bad_lines_are_skipped_with_line_numbers():
    bad_title = dict(AUTISM, id="26", text="Not the title\n\nbody")
    missing = {"id": "27", "title": "X", "text": "X\n\nbody"}
    report = IngestReport()
    records = list(parse_record_stream(
        stream(AUTISM, "{not json", bad_title, missing, b"\xff\xfe", "[1, 2]", AUTISM, ""),
        report,
    ))
    assert [r.id for r in records] == ["25"]
    assert [line for line, _ in report.errors] == [2, 3, 4, 5, 6, 7]
    assert report.skipped == 6
    assert "duplicate" in report.errors[-1][1]


def test_validation():
    with pytest.raises(RecordError):
        ArticleRecord("1", "u", "  ", "  \n\nbody").validate()
    with pytest.raises(RecordError):
        ArticleRecord("1", "u", "T", 5).validate()
    ArticleRecord("1", "u", "T", "T\n\nbody").validate()


def test_unreadable_stream_is_fatal():
    class Broken:
        def __iter__(self):
            yield json.dumps(AUTISM).encode()
            raise OSError("disk gone")

    gen = parse_record_stream(Broken())
    next(gen)
    with pytest.raises(IngestError):
        next(gen)


@given(st.text(), st.text(min_size=1).filter(lambda t: t.strip() and "\n\n" not in t), st.text())
def test_json_round_trip(article_id, title, body):
    article_id = article_id.strip() or "x"
    title = title.strip()
    rec = ArticleRecord(article_id, "u", title, f"{title}\n\n{body}")
    back = list(parse_record_stream([record_to_json(rec).encode("utf-8")]))
    assert back == [rec]


def test_extract_anchors_example():
    spans = extract_anchors('<a href="Regressive%20autism">worsening</a>')
    assert [(s.target, s.anchor_text, s.span) for s in spans] == [
        ("Regressive autism", "worsening", (0, 43))]
    assert extract_anchors("plain text with no anchors") == []


def test_two_consecutive_anchors():
    text = '<a href="A">a</a><a href="B_c">b</a>'
    spans = extract_anchors(text)
    assert [s.target for s in spans] == ["A", "B c"]
    assert spans[0].span[1] == spans[1].span[0]


def test_malformed_anchors_are_plain_text():
    assert extract_anchors('<a href="x">never closed') == []
    assert extract_anchors('<a href="x"\n>t</a>') == []
    assert extract_anchors('<a href="">empty</a>') == []
    assert extract_anchors('<abbr href="x">t</a>') == []
    nested = '<a href="x">one <a href="y">two</a>'
    assert [s.target for s in extract_anchors(nested)] == ["y"]


def test_normalize_target():
    assert normalize_target("Regressive%20autism") == "Regressive autism"
    assert normalize_target("Foo_bar%5Fbaz") == "Foo bar baz"


# Independent reference scanner for property checks.
REFERENCE = re.compile(r'<a[ \t]+href="([^"<>\n]*)"[ \t]*>((?:(?!<a[ \t])[^\n])*?)</a>')

fragments = st.sampled_from([
    "word ", ". ", "<a", "<a ", "</a>", '"', ">", "\n", "href=", '<a href="T', '<a href="T">',
    '<a href="Some%20page">text</a>', '<a  href="x_y" >y</a>', "<b>", "é", "%20",
])


@given(st.lists(fragments, max_size=25))
def test_extract_anchors_matches_reference(parts):
    text = "".join(parts)
    expected = [(normalize_target(m.group(1)), m.group(2), m.span())
                for m in REFERENCE.finditer(text) if normalize_target(m.group(1))]
    got = [(s.target, s.anchor_text, s.span) for s in extract_anchors(text)]
    assert got == expected
    ends = [s.span for s in extract_anchors(text)]
    assert all(a[1] <= b[0] for a, b in zip(ends, ends[1:]))


def test_first_sentence_with_anchor():
    rec = make_record(25, "Autism", 'Autism is a <a href="developmental disorder">developmental '
                      "disorder</a> characterized by X. Second sentence.")
    fs = first_sentence(rec)
    assert fs.text.endswith("characterized by X.")
    assert [a.target for a in fs.anchors] == ["developmental disorder"]
    assert body_after_first_sentence(rec) == " Second sentence."


def test_first_sentence_fallback_and_abbreviation():
    rec = make_record(1, "T", "one sentence without terminator\nsecond paragraph. More.")
    assert first_sentence(rec).text == "one sentence without terminator"
    rec = make_record(2, "T", "U.S. policy began here. Next.")
    assert first_sentence(rec).text == "U.S. policy began here."


def test_sentence_end_inside_anchor_text():
    rec = make_record(3, "T", 'See <a href="X">the end.</a> Then more.')
    assert first_sentence(rec).text == 'See <a href="X">the end.</a>'


def test_terminators():
    assert first_sentence(make_record(4, "T", "Really? Yes.")).text == "Really?"
    assert first_sentence(make_record(5, "T", "Stop! 42 is next.")).text == "Stop!"
    assert first_sentence(make_record(6, "T", "Ends here.")).text == "Ends here."


def test_empty_body():
    with pytest.raises(EmptyBody):
        first_sentence(make_record(7, "T", "   "))


@given(st.lists(st.sampled_from(list("ab .!?\nAB<>/\"") + ['<a href="x">', "</a>"])))
def test_first_sentence_is_prefix_of_first_paragraph(parts):
    body = "".join(parts)
    rec = make_record(8, "T", body)
    if not rec.body.strip():
        return
    fs = first_sentence(rec).text
    para = first_paragraph(rec)
    assert para.startswith(fs)
    assert fs + body_after_first_sentence(rec) == rec.body
