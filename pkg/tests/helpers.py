from wikiset.ingest import ArticleRecord


def make_record(article_id, title, body):
    return ArticleRecord(str(article_id), f"https://en.wikipedia.org/wiki?curid={article_id}",
                         title, f"{title}\n\n{body}")

import random
import re
from urllib.parse import quote, unquote

from wikiset.dataset import id_sort_key
from wikiset.ingest import EmptyBody, first_sentence

_ANCHOR = re.compile(r'<a[ \t]+href="([^"<>\n]*)"[ \t]*>((?:(?!<a[ \t])[^\n])*?)</a>')
_WORDS = ("alpha beta gamma delta river stone music theory city north south early modern "
          "system language history science animal plant island mountain king war art").split()


def synthetic_articles(n, seed=0, links_per_sentence=3):
    """Wikipedia-like records exercising the link and sentence rules.

    Popularity of link targets is skewed so some articles collect many
    incoming first-sentence links. A few records have duplicate titles,
    empty bodies, lowercase or encoded targets, and dangling links.
    """
    rng = random.Random(seed)
    titles = [f"{rng.choice(_WORDS).capitalize()} {rng.choice(_WORDS)} {i}" for i in range(n)]
    weights = [1.0 / (k + 1) for k in range(n)]
    records = []
    for i, title in enumerate(titles):
        if i % 97 == 13 and i > 0:
            title = titles[i - 1]  # duplicate title
        if i % 151 == 7:
            records.append(make_record(i + 1, title, ""))
            continue

        def link():
            r = rng.random()
            target = rng.choices(titles, weights)[0]
            if r < 0.1:
                target = "Nonexistent page " + str(rng.randrange(10**6))
            elif r < 0.2:
                target = target[0].lower() + target[1:]
            elif r < 0.3:
                target = target.replace(" ", "_") + "#History"
            label = rng.choice(_WORDS)
            return f'<a href="{quote(target)}">{label}</a>'

        words = [rng.choice(_WORDS) for _ in range(rng.randint(4, 9))]
        for _ in range(rng.randint(0, links_per_sentence)):
            words.insert(rng.randrange(len(words) + 1), link())
        if rng.random() < 0.3:
            words.insert(1, "e.g. the")
        first = f"{title} is a " + " ".join(words) + "."
        rest = " ".join(rng.choice(_WORDS) for _ in range(rng.randint(0, 40)))
        second = f" Also {link()} and {rest}." if rng.random() < 0.8 else ""
        tail = "\n" + " ".join(rng.choice(_WORDS) for _ in range(rng.randint(0, 30)))
        records.append(make_record(i + 1, title, first + second + tail))
    rng.shuffle(records)
    return records


def _norm(title):
    return " ".join(title.replace("_", " ").split())


def _fold(title):
    return title[:1].upper() + title[1:]


def brute_force_qrels(records, query_ids, doc_ids):
    """Quadratic scan: grade 2 for the same article, 1 when d's first
    sentence links to q's article."""
    by_exact, by_fold = {}, {}
    for r in sorted(records, key=lambda r: id_sort_key(r.id)):
        by_exact.setdefault(_norm(r.title), r.id)
    for title, rid in sorted(by_exact.items(), key=lambda kv: id_sort_key(kv[1])):
        by_fold.setdefault(_fold(title), rid)

    targets = {}
    for d in records:
        try:
            sentence = first_sentence(d).text
        except EmptyBody:
            sentence = ""
        found = []
        for m in _ANCHOR.finditer(sentence):
            t = _norm(unquote(m.group(1)).split("#")[0])
            if t:
                found.append(t)
        targets[d.id] = found

    def resolve(target):
        if target in by_exact:
            return by_exact[target]
        return by_fold.get(_fold(target))

    linked = [(d.id, {resolve(t) for t in targets[d.id]}) for d in records if d.id in doc_ids]
    out = set()
    for q in records:
        if q.id not in query_ids:
            continue
        if q.id in doc_ids:
            out.add((q.id, q.id, 2))
        out.update((q.id, d, 1) for d, hits in linked if q.id in hits and d != q.id)
    return out
