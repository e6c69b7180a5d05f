"""TREC-style evaluation: run files, qrels, MAP / nDCG / Recall@1000,
paired significance testing and the per-generated-document variance table.

Conventions follow the common trec_eval defaults: binary relevance at grade
>= 1 for MAP and recall, linear gain max(grade, 0) with a log2(i + 1)
discount for nDCG (ideal ranking over all positively judged documents, no
cutoff beyond the run depth of 1000), and queries with no relevant documents
excluded from means.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

from scipy.special import betainc

from .errors import FormatError, GrmError
from .expansion import RmParams, execute_expanded, grm_expand
from .generation import GeneratedDocument, Topic
from .index import Bm25Params, InvertedIndex, ScoredDoc
from .rase import RaseWeight

log = logging.getLogger(__name__)

RUN_DEPTH = 1000

METRICS = ("map", "ndcg", "recall_1000")


class RunEntry(NamedTuple):
    qid: str
    docid: str
    rank: int
    score: float
    tag: str


Qrels = dict[str, dict[str, int]]


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------


def write_run(run: Mapping[str, Sequence[ScoredDoc]], tag: str, path: str) -> None:
    """Write "qid Q0 docid rank score tag" rows, qids sorted, ranks from 1.

    Scores are printed with 6 decimal places; reading the file back and
    rewriting it reproduces the bytes exactly.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for qid in sorted(run):
            for rank, hit in enumerate(run[qid], 1):
                fh.write(f"{qid} Q0 {hit.docid} {rank} {hit.score:.6f} {tag}\n")


def read_run(path: str) -> tuple[dict[str, list[RunEntry]], str]:
    """Read a run file, validating per-query invariants.

    Within a qid ranks must be contiguous from 1, scores non-increasing and
    docids unique.  Returns (entries grouped by qid, run tag).
    """
    by_qid: dict[str, list[RunEntry]] = {}
    tag = ""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 6:
                raise FormatError(f"{path}:{lineno}: expected 6 space-separated fields")
            qid, _, docid, rank_s, score_s, tag = parts
            try:
                entry = RunEntry(qid, docid, int(rank_s), float(score_s), tag)
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: bad rank or score") from exc
            rows = by_qid.setdefault(qid, [])
            if entry.rank != len(rows) + 1:
                raise FormatError(
                    f"{path}:{lineno}: rank {entry.rank} out of order for qid {qid}"
                )
            if rows and entry.score > rows[-1].score:
                raise FormatError(f"{path}:{lineno}: scores increase within qid {qid}")
            if any(r.docid == docid for r in rows):
                raise FormatError(f"{path}:{lineno}: duplicate docid {docid} in qid {qid}")
            rows.append(entry)
    return by_qid, tag


def read_qrels(path: str) -> Qrels:
    """Read "qid 0 docid grade" judgments; grades may be negative."""
    qrels: Qrels = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise FormatError(f"{path}:{lineno}: expected 'qid 0 docid grade'")
            qid, _, docid, grade_s = parts
            try:
                qrels.setdefault(qid, {})[docid] = int(grade_s)
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: bad grade {grade_s!r}") from exc
    return qrels


def write_qrels(qrels: Qrels, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for qid in sorted(qrels):
            for docid in sorted(qrels[qid]):
                fh.write(f"{qid} 0 {docid} {qrels[qid][docid]}\n")


# ---------------------------------------------------------------------------
# Metrics (per query)
# ---------------------------------------------------------------------------


def average_precision(ranking: Sequence[str], judged: Mapping[str, int]) -> float | None:
    """AP with binary relevance at grade >= 1, over the first 1000 ranks.

    Returns None when the query has no relevant documents (undefined;
    excluded from means).
    """
    total_relevant = sum(1 for g in judged.values() if g >= 1)
    if total_relevant == 0:
        return None
    hits = 0
    precision_sum = 0.0
    for rank, docid in enumerate(ranking[:RUN_DEPTH], 1):
        if judged.get(docid, 0) >= 1:
            hits += 1
            precision_sum += hits / rank
    return precision_sum / total_relevant


def ndcg(ranking: Sequence[str], judged: Mapping[str, int]) -> float | None:
    """nDCG with linear gain and log2(i + 1) discount; None if ideal DCG is 0."""
    gains = sorted((max(g, 0) for g in judged.values()), reverse=True)
    ideal = sum(g / math.log2(i + 1) for i, g in enumerate(gains, 1) if g > 0)
    if ideal == 0.0:
        return None
    dcg = 0.0
    for rank, docid in enumerate(ranking[:RUN_DEPTH], 1):
        gain = max(judged.get(docid, 0), 0)
        if gain > 0:
            dcg += gain / math.log2(rank + 1)
    return dcg / ideal


def recall_at_k(ranking: Sequence[str], judged: Mapping[str, int], k: int = 1000) -> float | None:
    """Fraction of the relevant documents present in the top k."""
    relevant = {d for d, g in judged.items() if g >= 1}
    if not relevant:
        return None
    found = sum(1 for docid in ranking[:k] if docid in relevant)
    return found / len(relevant)


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Two-sided paired t-test; returns (t statistic, p-value).

    Conventions for degenerate inputs: zero-variance differences with zero
    mean give p = 1.0 (identical systems), zero variance with nonzero mean
    gives p = 0.0.  The p-value comes from the t-distribution CDF expressed
    through the regularized incomplete beta function.
    """
    if len(a) != len(b):
        raise GrmError(f"paired t-test needs equal lengths, got {len(a)} and {len(b)}")
    n = len(a)
    if n < 2:
        raise GrmError("paired t-test needs at least 2 paired observations")
    diffs = [x - y for x, y in zip(a, b)]
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        if mean == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, mean), 0.0
    t = mean / math.sqrt(var / n)
    dof = n - 1
    p = float(betainc(dof / 2.0, 0.5, dof / (dof + t * t)))
    return t, p


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class MetricReport:
    tag: str
    per_query: dict[str, dict[str, float]] = field(default_factory=dict)

    @property
    def query_count(self) -> int:
        return len(self.per_query)

    def mean(self, metric: str) -> float:
        values = [m[metric] for m in self.per_query.values()]
        return sum(values) / len(values) if values else 0.0

    @property
    def means(self) -> dict[str, float]:
        return {metric: self.mean(metric) for metric in METRICS}


def evaluate_run(
    run: Mapping[str, Sequence[str]] | Mapping[str, Sequence[RunEntry]],
    qrels: Qrels,
    tag: str = "",
) -> MetricReport:
    """Score a run (qid -> ranked docids or RunEntry rows) against qrels.

    Queries missing from the qrels, or with no relevant documents, are
    excluded.  Queries judged but missing from the run are also excluded
    (a warning is the CLI's job).
    """
    report = MetricReport(tag=tag)
    for qid in sorted(run):
        judged = qrels.get(qid)
        if not judged:
            continue
        ranking = [
            row.docid if isinstance(row, RunEntry) else row for row in run[qid]
        ]
        ap = average_precision(ranking, judged)
        if ap is None:
            continue
        report.per_query[qid] = {
            "map": ap,
            "ndcg": ndcg(ranking, judged) or 0.0,
            "recall_1000": recall_at_k(ranking, judged) or 0.0,
        }
    return report


# ---------------------------------------------------------------------------
# Per-generated-document variance analysis
# ---------------------------------------------------------------------------


class VarianceRow(NamedTuple):
    qid: str
    position: int  # 1 = worst expansion document for the topic
    map: float
    recall_1000: float
    gen_key: tuple[str, int, int]


def variance_analysis(
    topic: Topic,
    pool: Sequence[GeneratedDocument],
    index: InvertedIndex,
    params: Bm25Params,
    qrels: Qrels,
    rm: RmParams,
) -> tuple[list[VarianceRow], list[tuple[tuple[str, int, int], str]]]:
    """Measure how each generated document performs as the sole feedback doc.

    Each pool document alone (fb_docs=1, uniform weight) drives an expansion
    and a depth-1000 retrieval; results are sorted ascending by MAP and
    numbered 1..N (worst to best).  Documents whose pipeline fails are
    reported in the second return value instead of aborting the topic.
    """
    judged = qrels.get(topic.qid, {})
    solo = RmParams(
        fb_docs=1,
        fb_terms=rm.fb_terms,
        original_query_weight=rm.original_query_weight,
    )
    measured: list[tuple[float, float, tuple[str, int, int]]] = []
    failures: list[tuple[tuple[str, int, int], str]] = []
    for doc in pool:
        try:
            expanded = grm_expand(
                topic, [doc], [RaseWeight(doc.gen_key, 1.0)], solo, index.analyzer
            )
            results = execute_expanded(expanded, index, params, RUN_DEPTH)
            ranking = [hit.docid for hit in results]
            ap = average_precision(ranking, judged)
            recall = recall_at_k(ranking, judged)
            if ap is None or recall is None:
                failures.append((doc.gen_key, "no relevant documents judged for topic"))
                continue
            measured.append((ap, recall, doc.gen_key))
        except GrmError as exc:
            log.warning("qid %s: variance pipeline failed for %s: %s",
                        topic.qid, doc.gen_key, exc)
            failures.append((doc.gen_key, str(exc)))
    measured.sort(key=lambda row: (row[0], row[2]))
    rows = [
        VarianceRow(topic.qid, position, ap, recall, gen_key)
        for position, (ap, recall, gen_key) in enumerate(measured, 1)
    ]
    return rows, failures


def write_variance_csv(rows: Sequence[VarianceRow], path: str) -> None:
    """Write the variance table: header qid,position,map,recall_at_1000."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("qid,position,map,recall_at_1000\n")
        for row in rows:
            fh.write(f"{row.qid},{row.position},{row.map:.6f},{row.recall_1000:.6f}\n")
