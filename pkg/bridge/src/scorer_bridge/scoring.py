"""Pair scoring with max-passage aggregation.

Each document is segmented into overlapping passages; the document's score
for its query is the maximum passage score.  Output rows match the input
rows one-to-one, in order.
"""

from __future__ import annotations

from typing import Sequence

from .io import ScoreRequest, read_pairs, write_scores
from .passages import split_passages
from .scorers import PassageScorer


def score_pairs(
    pairs: Sequence[ScoreRequest],
    scorer: PassageScorer,
    passage_tokens: int = 256,
    stride: int = 128,
) -> list[tuple[str, str, float]]:
    flat: list[tuple[str, str]] = []
    spans: list[tuple[int, int]] = []
    for pair in pairs:
        passages = split_passages(pair.document, passage_tokens, stride)
        start = len(flat)
        flat.extend((pair.query, passage) for passage in passages)
        spans.append((start, len(flat)))
    all_scores = scorer.score_batch(flat)
    rows = []
    for pair, (start, end) in zip(pairs, spans):
        rows.append((pair.qid, pair.docid, max(all_scores[start:end])))
    return rows


def score_pairs_file(
    pairs_path: str,
    out_path: str,
    scorer: PassageScorer,
    passage_tokens: int = 256,
    stride: int = 128,
) -> int:
    """Score a pairs TSV into a scores TSV; returns the row count."""
    pairs = read_pairs(pairs_path)
    rows = score_pairs(pairs, scorer, passage_tokens, stride)
    write_scores(rows, out_path)
    return len(rows)
