"""Query expansion: classic RM3 feedback and the generative relevance model.

A language model here is a plain ``dict[str, float]`` whose values are
positive and sum to 1 (or an empty dict).  Expansion mixes feedback models
into the original query model:

    weight(w) = lambda * P(w|Q) + (1 - lambda) * P(w|feedback)

where the feedback model is a weight-normalized convex combination of
per-document models, truncated to the strongest ``fb_terms`` terms.  For RM3
the documents are the first-pass BM25 results weighted by softmaxed Dirichlet
query likelihoods; for the generative variant they are LLM-generated
documents weighted by relevance-aware sample estimates.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .analysis import AnalyzerConfig, analyze
from .errors import DocumentNotFoundError, GrmError
from .generation import GeneratedDocument, Topic
from .index import (
    Bm25Params,
    InvertedIndex,
    ScoredDoc,
    bm25_search,
    doc_language_model,
    weighted_search,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RmParams:
    """Feedback-model knobs: document count, term count, interpolation weight."""

    fb_docs: int = 10
    fb_terms: int = 20
    original_query_weight: float = 0.5

    def __post_init__(self) -> None:
        if self.fb_docs < 1:
            raise ValueError(f"rm.fb_docs must be >= 1, got {self.fb_docs}")
        if self.fb_terms < 1:
            raise ValueError(f"rm.fb_terms must be >= 1, got {self.fb_terms}")
        if not 0.0 <= self.original_query_weight <= 1.0:
            raise ValueError(
                "rm.original_query_weight must be in [0, 1], "
                f"got {self.original_query_weight}"
            )


@dataclass(frozen=True)
class QlParams:
    """Dirichlet smoothing for query-likelihood scoring."""

    dirichlet_mu: float = 1000.0

    def __post_init__(self) -> None:
        if self.dirichlet_mu <= 0:
            raise ValueError(f"ql.dirichlet_mu must be > 0, got {self.dirichlet_mu}")


@dataclass(frozen=True)
class ExpandedQuery:
    qid: str
    terms: dict[str, float]
    provenance: str  # "rm3" or "grm"
    params: dict[str, object] = field(default_factory=dict)


def mle_model(tokens: Iterable[str]) -> dict[str, float]:
    """Maximum-likelihood term distribution of a token sequence."""
    counts = Counter(tokens)
    total = sum(counts.values())
    if total == 0:
        return {}
    return {term: c / total for term, c in counts.items()}


def query_likelihood(
    query_tokens: Sequence[str],
    docid: str,
    index: InvertedIndex,
    ql: QlParams | None = None,
) -> float:
    """Dirichlet-smoothed log P(Q|D).

    log P = sum_q log((tf(q, D) + mu * P(q|C)) / (|D| + mu)).  Query terms
    absent from the entire collection are skipped: they carry no evidence
    under the collection-smoothed model.
    """
    if ql is None:
        ql = QlParams()
    if docid not in index.doc_store:
        raise DocumentNotFoundError(docid)
    counts = index.doc_store[docid]
    doc_len = index.doc_lengths[docid]
    mu = ql.dirichlet_mu
    total = 0.0
    for term in query_tokens:
        p_coll = index.collection_prob(term)
        if p_coll == 0.0:
            continue
        total += math.log((counts.get(term, 0) + mu * p_coll) / (doc_len + mu))
    return total


def relevance_model(
    feedback: Sequence[tuple[Mapping[str, float], float]],
) -> dict[str, float]:
    """Mix per-document models into one: P(w|R) = sum_D P(w|D) * w_D / sum w.

    Weights are normalized by their sum, so the output is invariant to
    rescaling all weights by any positive constant.  Document models that are
    empty contribute nothing and are dropped along with their weight.
    """
    usable = [(model, w) for model, w in feedback if model]
    if any(w < 0 for _, w in usable):
        raise GrmError("relevance model weights must be non-negative")
    total = sum(w for _, w in usable)
    if total <= 0:
        raise GrmError("all feedback weights are zero; nothing to mix")
    mixed: dict[str, float] = {}
    for model, weight in usable:
        share = weight / total
        if share == 0.0:
            continue
        for term, prob in model.items():
            mixed[term] = mixed.get(term, 0.0) + prob * share
    return mixed


def truncate_and_renormalize(model: Mapping[str, float], fb_terms: int) -> dict[str, float]:
    """Keep the top ``fb_terms`` terms by probability (ties: term ascending)."""
    if len(model) <= fb_terms:
        items = list(model.items())
    else:
        items = sorted(model.items(), key=lambda kv: (-kv[1], kv[0]))[:fb_terms]
    total = sum(p for _, p in items)
    if total <= 0:
        return {}
    return {term: p / total for term, p in items}


def interpolate(
    original: Mapping[str, float],
    feedback: Mapping[str, float],
    lam: float,
    *,
    qid: str = "",
    provenance: str = "rm3",
    params: dict[str, object] | None = None,
) -> ExpandedQuery:
    """Blend the original query model with the feedback model at weight lambda."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"original_query_weight must be in [0, 1], got {lam}")
    terms: dict[str, float] = {}
    for term, prob in original.items():
        terms[term] = lam * prob
    for term, prob in feedback.items():
        terms[term] = terms.get(term, 0.0) + (1.0 - lam) * prob
    terms = {t: w for t, w in terms.items() if w > 0.0}
    return ExpandedQuery(qid=qid, terms=terms, provenance=provenance, params=params or {})


def _softmax(values: Sequence[float]) -> list[float]:
    peak = max(values)
    exps = [math.exp(v - peak) for v in values]
    total = sum(exps)
    return [e / total for e in exps]


def rm3_expand(
    topic: Topic,
    index: InvertedIndex,
    bm25: Bm25Params,
    rm: RmParams,
    ql: QlParams | None = None,
) -> ExpandedQuery:
    """Pseudo-relevance feedback over the first-pass BM25 results.

    Feedback document weights are softmax-normalized Dirichlet query
    log-likelihoods.  If the first pass retrieves nothing, the expanded
    query falls back to the original query model.
    """
    if ql is None:
        ql = QlParams()
    snapshot: dict[str, object] = {
        "fb_docs": rm.fb_docs,
        "fb_terms": rm.fb_terms,
        "original_query_weight": rm.original_query_weight,
        "k1": bm25.k1,
        "b": bm25.b,
        "dirichlet_mu": ql.dirichlet_mu,
    }
    query_tokens = analyze(topic.text, index.analyzer)
    original = mle_model(query_tokens)
    first_pass = bm25_search(query_tokens, index, bm25, rm.fb_docs)
    if not first_pass:
        log.warning("qid %s: empty first pass, expansion falls back to the query", topic.qid)
        return ExpandedQuery(topic.qid, dict(original), "rm3", snapshot)
    logql = [query_likelihood(query_tokens, hit.docid, index, ql) for hit in first_pass]
    weights = _softmax(logql)
    feedback = [
        (doc_language_model(hit.docid, index), w)
        for hit, w in zip(first_pass, weights)
    ]
    model = truncate_and_renormalize(relevance_model(feedback), rm.fb_terms)
    return interpolate(
        original, model, rm.original_query_weight,
        qid=topic.qid, provenance="rm3", params=snapshot,
    )


def grm_expand(
    topic: Topic,
    pool: Sequence[GeneratedDocument],
    weights: Sequence,
    rm: RmParams,
    analyzer: AnalyzerConfig,
) -> ExpandedQuery:
    """Expansion from generated documents weighted by relevance estimates.

    ``weights`` aligns with the pool by gen_key (see rase.RaseWeight).  The
    strongest ``fb_docs`` generated documents by weight (ties: gen_key
    ascending) form the feedback set; fb_docs larger than the pool clamps to
    the pool size.  Generated documents are analyzed with the collection's
    analyzer so expansion terms share the index vocabulary.
    """
    if not pool:
        raise GrmError(f"qid {topic.qid}: empty generated-document pool")
    by_key = {w.gen_key: w.weight for w in weights}
    missing = [d.gen_key for d in pool if d.gen_key not in by_key]
    if missing:
        raise GrmError(f"qid {topic.qid}: no weight for generated document {missing[0]}")
    snapshot: dict[str, object] = {
        "fb_docs": rm.fb_docs,
        "fb_terms": rm.fb_terms,
        "original_query_weight": rm.original_query_weight,
    }
    selected = sorted(pool, key=lambda d: (-by_key[d.gen_key], d.gen_key))
    selected = selected[: min(rm.fb_docs, len(selected))]
    feedback = []
    for doc in selected:
        model = mle_model(analyze(doc.text, analyzer))
        if not model:
            log.warning(
                "qid %s: generated document %s analyzed to nothing; skipped",
                topic.qid, doc.gen_key,
            )
            continue
        feedback.append((model, by_key[doc.gen_key]))
    if not feedback:
        raise GrmError(f"qid {topic.qid}: every selected generated document was empty")
    model = truncate_and_renormalize(relevance_model(feedback), rm.fb_terms)
    original = mle_model(analyze(topic.text, analyzer))
    return interpolate(
        original, model, rm.original_query_weight,
        qid=topic.qid, provenance="grm", params=snapshot,
    )


def execute_expanded(
    expanded: ExpandedQuery,
    index: InvertedIndex,
    params: Bm25Params,
    k: int,
) -> list[ScoredDoc]:
    """Second-pass retrieval: score(D) = sum_w weight(w) * bm25_term_score(w, D).

    Rankings are invariant to positive rescaling of the weights; all-zero
    weights produce an empty result.
    """
    return weighted_search(expanded.terms, index, params, k)


def write_expanded_query(expanded: ExpandedQuery, path: str) -> None:
    """Dump "qid<TAB>term<TAB>weight" rows, weight descending (ties: term)."""
    rows = sorted(expanded.terms.items(), key=lambda kv: (-kv[1], kv[0]))
    with open(path, "w", encoding="utf-8") as fh:
        for term, weight in rows:
            fh.write(f"{expanded.qid}\t{term}\t{weight:.9f}\n")
