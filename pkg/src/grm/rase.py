"""Relevance-aware sample estimation for generated documents.

A generated document's expansion weight is derived from real documents: its
nearest collection neighbors are retrieved by treating the generated text as
a BM25 query, each neighbor's relevance to the original query is estimated
by a pluggable estimator, and the estimates are aggregated with a DCG-style
discount so the best-estimated neighbor counts undiscounted:

    weight = s_1 + sum_{i=2..K} s_i / log2(i)

with the estimates sorted descending.  Estimators with an unbounded native
scale (bm25, external) are min-max normalized per neighbor list first;
uniform and gold estimates are already on [0, 1] and are used as-is, which
keeps gold weights monotone in the neighbors' judged grades.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

from .analysis import analyze
from .errors import (
    ConfigError,
    ContractViolationError,
    ExternalScoreMissingError,
    FormatError,
)
from .generation import GeneratedDocument, Topic
from .index import Bm25Params, InvertedIndex, doc_as_query_search, score_document

log = logging.getLogger(__name__)

ESTIMATOR_KINDS = ("uniform", "bm25", "external", "gold")

# Estimators whose raw scores need per-list min-max normalization before the
# DCG aggregation; the others already produce values on [0, 1].
_UNBOUNDED_ESTIMATORS = frozenset({"bm25", "external"})

GenKey = tuple[str, int, int]


@dataclass(frozen=True)
class NeighborSet:
    gen_key: GenKey
    neighbors: list  # list[ScoredDoc], similarity descending, docid ascending
    k_rase: int


@dataclass(frozen=True)
class RaseWeight:
    gen_key: GenKey
    weight: float


@dataclass(frozen=True)
class EstimatorSources:
    """Inputs for the relevance estimators; which fields are required depends
    on the estimator kind (bm25: index+params, external: scores, gold: qrels)."""

    index: InvertedIndex | None = None
    params: Bm25Params | None = None
    scores: Mapping[tuple[str, str], float] | None = None
    qrels: Mapping[str, Mapping[str, int]] | None = None


def retrieve_neighbors(
    gen_doc: GeneratedDocument,
    index: InvertedIndex,
    params: Bm25Params,
    k_rase: int,
) -> NeighborSet:
    """Find the generated document's closest collection documents.

    Uses the generated text, analyzed with the index's analyzer, as a BM25
    query.  An empty or out-of-vocabulary generated document yields an empty
    neighbor list.
    """
    if k_rase < 1:
        raise ConfigError(f"rase.k_rase must be >= 1, got {k_rase}")
    bag = Counter(analyze(gen_doc.text, index.analyzer))
    neighbors = doc_as_query_search(bag, index, params, k_rase)
    return NeighborSet(gen_key=gen_doc.gen_key, neighbors=neighbors, k_rase=k_rase)


def estimate_relevance(
    topic: Topic,
    neighbors: NeighborSet,
    kind: str,
    sources: EstimatorSources,
) -> list[tuple[str, float]]:
    """Estimate each neighbor's relevance to the original query.

    uniform: every neighbor scores 1.0.
    bm25:    BM25 score of the original query against the neighbor.
    external: looked up from a (qid, docid) -> score table; a miss is an error.
    gold:    judged grade scaled by the qrels' maximum positive grade;
             negative grades clamp to 0, unjudged neighbors score 0.
    """
    if kind == "uniform":
        return [(n.docid, 1.0) for n in neighbors.neighbors]
    if kind == "bm25":
        if sources.index is None or sources.params is None:
            raise ConfigError("bm25 estimator needs an index and tuned parameters")
        query_bag = Counter(analyze(topic.text, sources.index.analyzer))
        return [
            (n.docid, score_document(query_bag, n.docid, sources.index, sources.params))
            for n in neighbors.neighbors
        ]
    if kind == "external":
        if sources.scores is None:
            raise ConfigError("external estimator needs a scores table")
        out = []
        for n in neighbors.neighbors:
            key = (topic.qid, n.docid)
            if key not in sources.scores:
                raise ExternalScoreMissingError(topic.qid, n.docid)
            out.append((n.docid, sources.scores[key]))
        return out
    if kind == "gold":
        if sources.qrels is None:
            raise ConfigError("gold estimator needs qrels")
        max_rel = 0
        for judged in sources.qrels.values():
            for grade in judged.values():
                max_rel = max(max_rel, grade)
        topic_qrels = sources.qrels.get(topic.qid, {})
        out = []
        for n in neighbors.neighbors:
            grade = max(topic_qrels.get(n.docid, 0), 0)
            out.append((n.docid, grade / max_rel if max_rel > 0 else 0.0))
        return out
    raise ConfigError(f"unknown estimator kind {kind!r} (expected one of {ESTIMATOR_KINDS})")


def normalize_scores(raw: Sequence[tuple[str, float]]) -> list[tuple[str, float]]:
    """Min-max normalize one neighbor list onto [0, 1], preserving order.

    A constant list maps to all 1.0 so that estimators with no discriminating
    signal keep full mass rather than vanishing.
    """
    if not raw:
        return []
    values = [s for _, s in raw]
    lo, hi = min(values), max(values)
    if hi == lo:
        return [(docid, 1.0) for docid, _ in raw]
    return [(docid, (s - lo) / (hi - lo)) for docid, s in raw]


def dcg_aggregate(normalized: Sequence[float]) -> float:
    """Collapse descending-sorted scores in [0, 1] into one weight.

    weight = s_1 + sum_{i=2..K} s_i / log2(i); empty input yields 0.
    """
    for i in range(1, len(normalized)):
        if normalized[i] > normalized[i - 1]:
            raise ContractViolationError(
                "dcg_aggregate requires scores sorted descending "
                f"(position {i}: {normalized[i - 1]} < {normalized[i]})"
            )
    if not normalized:
        return 0.0
    total = normalized[0]
    for i, score in enumerate(normalized[1:], start=2):
        total += score / math.log2(i)
    return total


def rase_weights(
    pool: Sequence[GeneratedDocument],
    topic: Topic,
    index: InvertedIndex,
    params: Bm25Params,
    k_rase: int,
    kind: str,
    sources: EstimatorSources | None = None,
) -> list[RaseWeight]:
    """Compute one weight per generated document in the pool.

    A document with no neighbors, or whose neighbors all estimate to zero,
    weighs 0.  If that leaves the whole pool at zero the weights fall back
    to uniform (all 1.0) with a warning, so the downstream relevance model
    keeps a well-defined denominator.
    """
    if sources is None:
        sources = EstimatorSources()
    weights: list[RaseWeight] = []
    for doc in pool:
        neighbor_set = retrieve_neighbors(doc, index, params, k_rase)
        estimates = estimate_relevance(topic, neighbor_set, kind, sources)
        if not estimates or max(s for _, s in estimates) <= 0.0:
            weights.append(RaseWeight(doc.gen_key, 0.0))
            continue
        if kind in _UNBOUNDED_ESTIMATORS:
            estimates = normalize_scores(estimates)
        ordered = sorted((s for _, s in estimates), reverse=True)
        weights.append(RaseWeight(doc.gen_key, dcg_aggregate(ordered)))
    if weights and all(w.weight == 0.0 for w in weights):
        log.warning(
            "qid %s: every generated document weighed 0 under the %s estimator; "
            "falling back to uniform weights",
            topic.qid, kind,
        )
        weights = [RaseWeight(w.gen_key, 1.0) for w in weights]
    return weights


def load_external_scores(path: str) -> dict[tuple[str, str], float]:
    """Read the external-scorer TSV: "qid<TAB>docid<TAB>score" per line."""
    scores: dict[tuple[str, str], float] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError(f"{path}:{lineno}: expected 'qid<TAB>docid<TAB>score'")
            try:
                scores[(parts[0], parts[1])] = float(parts[2])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: bad score {parts[2]!r}") from exc
    return scores


def dump_scorer_pairs(
    topic: Topic,
    pool: Sequence[GeneratedDocument],
    index: InvertedIndex,
    params: Bm25Params,
    k_rase: int,
    doc_texts: Mapping[str, str],
    path: str,
) -> int:
    """Write the (query, neighbor document) pairs an external scorer must score.

    Output format matches the scorer bridge input: "qid<TAB>docid<TAB>query
    <TAB>document" with tab/newline/backslash escaped inside text fields.
    Returns the number of pairs written.  ``doc_texts`` maps docid to raw
    document text (the index stores only analyzed terms).
    """

    def esc(text: str) -> str:
        return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")

    written: set[tuple[str, str]] = set()
    with open(path, "a", encoding="utf-8") as fh:
        for doc in pool:
            neighbor_set = retrieve_neighbors(doc, index, params, k_rase)
            for n in neighbor_set.neighbors:
                key = (topic.qid, n.docid)
                if key in written:
                    continue
                written.add(key)
                fh.write(
                    f"{topic.qid}\t{n.docid}\t{esc(topic.text)}\t{esc(doc_texts[n.docid])}\n"
                )
    return len(written)
