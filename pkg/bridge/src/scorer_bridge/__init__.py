"""Pair scorer for retrieval pipelines.

Reads (qid, docid, query, document) pairs from a TSV, scores each pair with
a pluggable passage scorer under max-passage aggregation, and writes the
(qid, docid, score) TSV that downstream relevance estimators consume.
"""

from .errors import BridgeError, FormatError, ModelError
from .io import ScoreRequest, read_pairs, write_scores
from .passages import split_passages
from .scorers import CrossEncoderScorer, OverlapScorer, load_scorer
from .scoring import score_pairs, score_pairs_file

__version__ = "0.1.0"
