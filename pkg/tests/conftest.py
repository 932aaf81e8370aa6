from pathlib import Path

import pytest

from wikiset.ingest import parse_record_stream

DATA = Path(__file__).parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def two_article_records():
    with open(DATA / "two_articles.jsonl", "rb") as f:
        return list(parse_record_stream(f))



def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, in criterion order."""
    lines = []
    for outcome in ("passed", "failed", "skipped", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            props = dict(getattr(rep, "user_properties", []) or [])
            if "criterion" not in props or rep.when not in ("call", "setup"):
                continue
            if outcome == "passed" and rep.when != "call":
                continue
            status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP", "error": "FAIL"}[outcome]
            detail = props.get("detail", "")
            if outcome == "skipped" and isinstance(rep.longrepr, tuple):
                detail = rep.longrepr[2]
            lines.append((props["criterion"], f"{status} criterion {props['criterion']}: "
                                              f"{props.get('title', '')} {detail}".rstrip()))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
