"""Run evaluation: P@k, nDCG, MAP, paired t-tests and LaTeX tables.

Conventions:

* a document is relevant when its grade is >= 1;
* nDCG uses exponential gain ``2**grade - 1`` and a ``log2(rank + 1)``
  discount; the ideal ranking is built from every judged document;
* plain ``nDCG`` is cut at the depth of the run for that query;
* queries that are judged but missing from a run score 0 on every metric.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, NamedTuple, Sequence

from .bm25 import RunEntry
from .dataset import RelevanceJudgment, id_sort_key

__all__ = [
    "METRICS",
    "EvaluationError",
    "RunEvaluation",
    "SignificanceVerdict",
    "TTestResult",
    "average_precision",
    "bonferroni",
    "compare_runs",
    "evaluate_run",
    "latex_table",
    "ndcg_at_k",
    "paired_ttest",
    "precision_at_k",
    "qrels_by_query",
    "regularized_incomplete_beta",
    "student_t_two_sided_p",
]

METRICS = ("P@5", "P@10", "P@20", "nDCG@5", "nDCG@10", "nDCG@20", "nDCG", "MAP")


class EvaluationError(ValueError):
    pass


Qrels = Mapping[str, Mapping[str, int]]


def qrels_by_query(judgments: Iterable[RelevanceJudgment]) -> dict[str, dict[str, int]]:
    out: dict[str, dict[str, int]] = defaultdict(dict)
    for j in judgments:
        out[j.query_id][j.doc_id] = j.grade
    return dict(out)


def precision_at_k(ranked: Sequence[str], rels: Mapping[str, int], k: int) -> float:
    """Relevant documents in the top ``k``, divided by ``k`` even for short runs."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return sum(1 for d in ranked[:k] if rels.get(d, 0) >= 1) / k


def _dcg(grades: Iterable[int]) -> float:
    return sum((2.0 ** g - 1.0) / math.log2(i + 2) for i, g in enumerate(grades))


def ndcg_at_k(ranked: Sequence[str], rels: Mapping[str, int], k: int | None = None) -> float:
    """nDCG at cutoff ``k``; ``None`` means the full depth of ``ranked``."""
    if k is None:
        k = len(ranked)
    if k <= 0:
        return 0.0
    ideal = _dcg(sorted((g for g in rels.values() if g > 0), reverse=True)[:k])
    if ideal == 0:
        return 0.0
    return _dcg(max(rels.get(d, 0), 0) for d in ranked[:k]) / ideal


def average_precision(ranked: Sequence[str], rels: Mapping[str, int]) -> float:
    n_rel = sum(1 for g in rels.values() if g >= 1)
    if n_rel == 0:
        return 0.0
    hits = 0
    total = 0.0
    for i, d in enumerate(ranked, 1):
        if rels.get(d, 0) >= 1:
            hits += 1
            total += hits / i
    return total / n_rel


def _query_metrics(ranked: Sequence[str], rels: Mapping[str, int]) -> dict[str, float]:
    return {
        "P@5": precision_at_k(ranked, rels, 5),
        "P@10": precision_at_k(ranked, rels, 10),
        "P@20": precision_at_k(ranked, rels, 20),
        "nDCG@5": ndcg_at_k(ranked, rels, 5),
        "nDCG@10": ndcg_at_k(ranked, rels, 10),
        "nDCG@20": ndcg_at_k(ranked, rels, 20),
        "nDCG": ndcg_at_k(ranked, rels),
        "MAP": average_precision(ranked, rels),
    }


@dataclass
class RunEvaluation:
    per_query: dict[str, dict[str, float]]
    means: dict[str, float]

    def values(self, metric: str) -> dict[str, float]:
        return {q: m[metric] for q, m in self.per_query.items()}

    def write_tsv(self, out: IO[str]) -> None:
        out.write("query_id\t" + "\t".join(METRICS) + "\n")
        for q, m in self.per_query.items():
            out.write(q + "\t" + "\t".join(f"{m[k]:.6f}" for k in METRICS) + "\n")

    def summary(self) -> dict:
        return {"queries": len(self.per_query), "means": dict(self.means)}


def evaluate_run(run: Iterable[RunEntry] | Mapping[str, Sequence[str]], qrels: Qrels) -> RunEvaluation:
    """Per-query metrics over every judged query, plus their means.

    ``run`` is a list of :class:`RunEntry` (ordered by their ``rank``) or a
    mapping from query id to a ranked list of document ids.
    """
    if isinstance(run, Mapping):
        ranked = {q: list(docs) for q, docs in run.items()}
    else:
        grouped: dict[str, list[RunEntry]] = defaultdict(list)
        for e in run:
            grouped[e.query_id].append(e)
        ranked = {q: [e.doc_id for e in sorted(es, key=lambda e: e.rank)]
                  for q, es in grouped.items()}
    unknown = [q for q in ranked if q not in qrels]
    if unknown:
        raise EvaluationError(f"run contains query id {unknown[0]!r} that has no judgments")

    per_query = {}
    for q in sorted(qrels, key=id_sort_key):
        per_query[q] = _query_metrics(ranked.get(q, []), qrels[q])
    n = len(per_query)
    means = {m: (math.fsum(v[m] for v in per_query.values()) / n if n else 0.0) for m in METRICS}
    return RunEvaluation(per_query, means)


# -- significance -------------------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, 1000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float, y: float | None = None) -> float:
    """``I_x(a, b)`` for ``a, b > 0`` and ``0 <= x <= 1``.

    ``y`` may pass ``1 - x`` when it is known more precisely than the
    subtraction would give.
    """
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if y is None:
        y = 1.0 - x
    if x == 0.0 or y == 0.0:
        return 0.0 if x == 0.0 else 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log(y))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, y) / b


def student_t_two_sided_p(t: float, df: float) -> float:
    """``P(|T| >= |t|)`` for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    t2 = t * t
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t2), t2 / (df + t2))


class TTestResult(NamedTuple):
    t_statistic: float
    p_value: float
    n: int


def _aligned(a, b) -> tuple[list[float], list[float]]:
    if isinstance(a, Mapping) or isinstance(b, Mapping):
        if not (isinstance(a, Mapping) and isinstance(b, Mapping)):
            raise EvaluationError("both samples must be keyed by query id, or neither")
        if a.keys() != b.keys():
            missing = sorted(set(a) ^ set(b), key=id_sort_key)[:3]
            raise EvaluationError(f"paired samples cover different queries (e.g. {missing})")
        keys = sorted(a, key=id_sort_key)
        return [float(a[k]) for k in keys], [float(b[k]) for k in keys]
    a, b = list(map(float, a)), list(map(float, b))
    if len(a) != len(b):
        raise EvaluationError(f"paired samples differ in length ({len(a)} vs {len(b)})")
    return a, b


def paired_ttest(a: Mapping[str, float] | Sequence[float],
                 b: Mapping[str, float] | Sequence[float]) -> TTestResult:
    """Two-sided paired t-test on ``a - b``.

    Constant differences give ``t = 0, p = 1`` when they are all zero and
    ``t = +-inf, p = 0`` otherwise.
    """
    xs, ys = _aligned(a, b)
    n = len(xs)
    if n < 2:
        raise EvaluationError(f"paired t-test needs at least 2 pairs, got {n}")
    diffs = [x - y for x, y in zip(xs, ys)]
    mean = math.fsum(diffs) / n
    var = math.fsum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, 1.0, n)
        return TTestResult(math.copysign(math.inf, mean), 0.0, n)
    t = mean / math.sqrt(var / n)
    return TTestResult(t, student_t_two_sided_p(t, n - 1), n)


def bonferroni(p_raw: float, m: int) -> float:
    if m < 1:
        raise ValueError("number of comparisons must be >= 1")
    return min(1.0, m * p_raw)


@dataclass(frozen=True)
class SignificanceVerdict:
    metric: str
    t_statistic: float
    p_raw: float
    p_corrected: float
    marker: str  # "+", "-" or ""


def compare_runs(baseline: RunEvaluation, systems: Mapping[str, RunEvaluation],
                 alpha: float = 0.01, m: int | None = None,
                 metrics: Sequence[str] = METRICS) -> dict[str, dict[str, SignificanceVerdict]]:
    """Test every system against the baseline on every metric.

    ``m`` defaults to the number of (system, metric) comparisons made here.
    """
    if m is None:
        m = max(1, len(systems) * len(metrics))
    verdicts: dict[str, dict[str, SignificanceVerdict]] = {}
    for name, ev in systems.items():
        row = {}
        for metric in metrics:
            t, p, _ = paired_ttest(ev.values(metric), baseline.values(metric))
            p_corr = bonferroni(p, m)
            diff = ev.means[metric] - baseline.means[metric]
            marker = ""
            if p_corr < alpha and diff != 0:
                marker = "+" if diff > 0 else "-"
            row[metric] = SignificanceVerdict(metric, t, p, p_corr, marker)
        verdicts[name] = row
    return verdicts


def latex_table(baseline: tuple[str, RunEvaluation],
                systems: Sequence[tuple[str, RunEvaluation]],
                alpha: float = 0.01, m: int | None = None) -> str:
    """A ``tabular`` block: one row per run, the baseline first.

    Significant differences from the baseline get a superscript ``+``/``-``;
    the best value of each column (at 4 decimals) is bold.
    """
    base_name, base_eval = baseline
    verdicts = compare_runs(base_eval, dict(systems), alpha=alpha, m=m) if systems else {}
    rows = [(base_name, base_eval)] + list(systems)
    best = {k: max(round(ev.means[k], 4) for _, ev in rows) for k in METRICS}

    def cell(name: str, ev: RunEvaluation, metric: str, is_base: bool) -> str:
        value = round(ev.means[metric], 4)
        s = f"{value:.4f}"
        if value == best[metric]:
            s = rf"\textbf{{{s}}}"
        if not is_base and verdicts[name][metric].marker:
            s += rf"\textsuperscript{{\textbf{{{verdicts[name][metric].marker}}}}}"
        return s

    lines = [
        r"\begin{tabular}{l" + "l" * len(METRICS) + "}",
        r"\hline",
        "Model & " + " & ".join(METRICS) + r"\\",
        r"\hline",
        r"\hline",
    ]
    for i, (name, ev) in enumerate(rows):
        cells = [cell(name, ev, k, i == 0) for k in METRICS]
        lines.append(_latex_escape(name) + " & " + " & ".join(cells) + r" \\")
        if i == 0:
            lines.append(r"\hline")
    lines += [r"\hline", r"\end{tabular}"]
    return "\n".join(lines) + "\n"


def _latex_escape(s: str) -> str:
    for ch in "&%$#_{}":
        s = s.replace(ch, "\\" + ch)
    return s


def write_summary(path, evaluations: Mapping[str, RunEvaluation],
                  verdicts: Mapping[str, Mapping[str, SignificanceVerdict]], extra: dict) -> None:
    doc = dict(extra)
    doc["runs"] = {name: ev.summary() for name, ev in evaluations.items()}
    doc["significance"] = {
        name: {k: {"t": v.t_statistic if math.isfinite(v.t_statistic) else str(v.t_statistic),
                   "p_raw": v.p_raw, "p_corrected": v.p_corrected, "marker": v.marker}
               for k, v in row.items()}
        for name, row in verdicts.items()
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
