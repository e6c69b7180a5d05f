"""Immutable inverted index with BM25 retrieval.

Scoring uses the Robertson BM25 formula with the non-negative IDF variant

    idf(t) = ln((N - df + 0.5) / (df + 0.5) + 1)

and term contribution  idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl/avgdl)).
Query-side repetition multiplies a term's contribution by its raw count in
the query (the k3 -> infinity simplification), which also makes whole
documents usable as queries.  Results are always ordered by score descending
with ties broken by docid ascending, so every search is deterministic.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

from .analysis import AnalyzerConfig, analyze
from .corpus import Document
from .errors import DocumentNotFoundError, DuplicateDocidError, FormatError

INDEX_FORMAT = "grm-index"
INDEX_VERSION = 1


class ScoredDoc(NamedTuple):
    docid: str
    score: float


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 0.9
    b: float = 0.4

    def __post_init__(self) -> None:
        if self.k1 < 0:
            raise ValueError(f"bm25.k1 must be >= 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"bm25.b must be in [0, 1], got {self.b}")


@dataclass(frozen=True)
class InvertedIndex:
    """Term postings plus collection statistics. Immutable after build."""

    postings: dict[str, list[tuple[str, int]]]  # term -> [(docid, tf)] sorted by docid
    doc_lengths: dict[str, int]
    doc_count: int
    avg_doc_length: float
    doc_store: dict[str, dict[str, int]]  # docid -> analyzed term counts
    analyzer: AnalyzerConfig
    collection_tf: dict[str, int] = field(default_factory=dict)
    collection_length: int = 0

    def df(self, term: str) -> int:
        plist = self.postings.get(term)
        return len(plist) if plist else 0

    def idf(self, term: str) -> float:
        df = self.df(term)
        if df == 0:
            return 0.0
        return math.log((self.doc_count - df + 0.5) / (df + 0.5) + 1.0)

    def collection_prob(self, term: str) -> float:
        """Collection language model P(term|C), the collection-wide MLE."""
        if self.collection_length == 0:
            return 0.0
        return self.collection_tf.get(term, 0) / self.collection_length


def build_index(documents: Iterable[Document], config: AnalyzerConfig | None = None) -> InvertedIndex:
    """Analyze a document stream and build the index.

    Rejects duplicate docids.  The result is independent of input order:
    postings are docid-sorted and searches iterate terms in sorted order.
    """
    if config is None:
        config = AnalyzerConfig()
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_lengths: dict[str, int] = {}
    doc_store: dict[str, dict[str, int]] = {}
    collection_tf: Counter[str] = Counter()
    for doc in documents:
        if doc.docid in doc_lengths:
            raise DuplicateDocidError(doc.docid)
        tokens = analyze(doc.text, config)
        counts = Counter(tokens)
        doc_lengths[doc.docid] = len(tokens)
        doc_store[doc.docid] = dict(counts)
        collection_tf.update(counts)
        for term, tf in counts.items():
            postings.setdefault(term, []).append((doc.docid, tf))
    for plist in postings.values():
        plist.sort(key=lambda entry: entry[0])
    doc_count = len(doc_lengths)
    total = sum(doc_lengths.values())
    return InvertedIndex(
        postings=postings,
        doc_lengths=doc_lengths,
        doc_count=doc_count,
        avg_doc_length=total / doc_count if doc_count else 0.0,
        doc_store=doc_store,
        analyzer=config,
        collection_tf=dict(collection_tf),
        collection_length=total,
    )


def _term_score(tf: int, doc_len: int, idf: float, index: InvertedIndex, params: Bm25Params) -> float:
    if index.avg_doc_length > 0:
        norm = 1.0 - params.b + params.b * (doc_len / index.avg_doc_length)
    else:
        norm = 1.0
    return idf * tf * (params.k1 + 1.0) / (tf + params.k1 * norm)


def weighted_search(
    term_weights: Mapping[str, float],
    index: InvertedIndex,
    params: Bm25Params,
    k: int,
) -> list[ScoredDoc]:
    """Rank documents by the weighted sum of per-term BM25 contributions.

    The workhorse behind token-sequence queries (integer weights), whole
    documents as queries, and weighted expanded queries.  Terms are visited
    in sorted order so per-document accumulation is reproducible regardless
    of how the weights mapping was assembled.
    """
    if k <= 0:
        return []
    scores: dict[str, float] = {}
    for term in sorted(term_weights):
        weight = term_weights[term]
        if weight <= 0:
            continue
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for docid, tf in plist:
            contrib = weight * _term_score(tf, index.doc_lengths[docid], idf, index, params)
            scores[docid] = scores.get(docid, 0.0) + contrib
    ranked = sorted(
        ((d, s) for d, s in scores.items() if s > 0.0),
        key=lambda item: (-item[1], item[0]),
    )
    return [ScoredDoc(docid, score) for docid, score in ranked[:k]]


def bm25_search(
    query_tokens: Sequence[str],
    index: InvertedIndex,
    params: Bm25Params,
    k: int,
) -> list[ScoredDoc]:
    """Top-k BM25 retrieval for an analyzed token sequence.

    Documents sharing no terms with the query are omitted; k=0 yields [].
    """
    return weighted_search(Counter(query_tokens), index, params, k)


def doc_as_query_search(
    source: Mapping[str, int] | Sequence[str],
    index: InvertedIndex,
    params: Bm25Params,
    k: int,
) -> list[ScoredDoc]:
    """BM25 retrieval using a document's analyzed token multiset as the query.

    Term repetitions in the source contribute via raw query-term-frequency
    multipliers; generated documents are typically hundreds of tokens long.
    """
    bag = source if isinstance(source, Mapping) else Counter(source)
    return weighted_search(bag, index, params, k)


def score_document(
    term_weights: Mapping[str, float],
    docid: str,
    index: InvertedIndex,
    params: Bm25Params,
) -> float:
    """BM25 score of one document for a weighted query (same math as search)."""
    if docid not in index.doc_store:
        raise DocumentNotFoundError(docid)
    counts = index.doc_store[docid]
    doc_len = index.doc_lengths[docid]
    total = 0.0
    for term in sorted(term_weights):
        weight = term_weights[term]
        tf = counts.get(term, 0)
        if weight <= 0 or tf == 0:
            continue
        total += weight * _term_score(tf, doc_len, index.idf(term), index, params)
    return total


def doc_language_model(docid: str, index: InvertedIndex) -> dict[str, float]:
    """Maximum-likelihood term distribution tf(w, D) / |D| of a stored document.

    Probabilities sum to 1 within 1e-9; an empty document yields an empty map.
    """
    if docid not in index.doc_store:
        raise DocumentNotFoundError(docid)
    counts = index.doc_store[docid]
    length = index.doc_lengths[docid]
    if length == 0:
        return {}
    return {term: tf / length for term, tf in counts.items()}


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------
#
# Plain-text JSONL, self-describing.  Line 1 is a header object with format
# name, version, analyzer settings (including the stopword list and its
# sha256) and collection statistics; every following line is one document:
# {"docid": ..., "length": ..., "tf": {...}} with docids in sorted order.
# Postings are rebuilt on load.


def save_index(index: InvertedIndex, path: str) -> None:
    header = {
        "format": INDEX_FORMAT,
        "version": INDEX_VERSION,
        "doc_count": index.doc_count,
        "avg_doc_length": index.avg_doc_length,
        "analyzer": {
            "stemmer": index.analyzer.stemmer,
            "lowercase": index.analyzer.lowercase,
            "stopwords": sorted(index.analyzer.stopwords),
            "stopword_sha256": index.analyzer.stopword_sha256(),
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for docid in sorted(index.doc_store):
            record = {
                "docid": docid,
                "length": index.doc_lengths[docid],
                "tf": index.doc_store[docid],
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def load_index(path: str) -> InvertedIndex:
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}:1: not an index file") from exc
        if header.get("format") != INDEX_FORMAT:
            raise FormatError(f"{path}: not a {INDEX_FORMAT} file")
        if header.get("version") != INDEX_VERSION:
            raise FormatError(
                f"{path}: index version {header.get('version')!r} unsupported "
                f"(expected {INDEX_VERSION})"
            )
        meta = header["analyzer"]
        config = AnalyzerConfig(
            stopwords=frozenset(meta["stopwords"]),
            stemmer=meta["stemmer"],
            lowercase=meta["lowercase"],
        )
        if config.stopword_sha256() != meta["stopword_sha256"]:
            raise FormatError(f"{path}: stopword list does not match its recorded hash")

        postings: dict[str, list[tuple[str, int]]] = {}
        doc_lengths: dict[str, int] = {}
        doc_store: dict[str, dict[str, int]] = {}
        collection_tf: Counter[str] = Counter()
        for lineno, line in enumerate(fh, 2):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: corrupt document record") from exc
            docid = record["docid"]
            if docid in doc_lengths:
                raise DuplicateDocidError(docid)
            counts = {str(t): int(c) for t, c in record["tf"].items()}
            doc_lengths[docid] = int(record["length"])
            doc_store[docid] = counts
            collection_tf.update(counts)
            for term, tf in counts.items():
                postings.setdefault(term, []).append((docid, tf))
    for plist in postings.values():
        plist.sort(key=lambda entry: entry[0])
    doc_count = len(doc_lengths)
    if doc_count != header["doc_count"]:
        raise FormatError(
            f"{path}: header says {header['doc_count']} documents, found {doc_count}"
        )
    total = sum(doc_lengths.values())
    return InvertedIndex(
        postings=postings,
        doc_lengths=doc_lengths,
        doc_count=doc_count,
        avg_doc_length=total / doc_count if doc_count else 0.0,
        doc_store=doc_store,
        analyzer=config,
        collection_tf=dict(collection_tf),
        collection_length=total,
    )
