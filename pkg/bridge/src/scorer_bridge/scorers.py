"""Passage scorers.

A scorer maps (query, passage) pairs to real-valued relevance scores in
batch.  ``CrossEncoderScorer`` wraps any sequence-classification re-ranker
checkpoint loadable by transformers (a local path or hub name);
``OverlapScorer`` is a deterministic lexical stand-in with no model
dependency, useful for tests and plumbing checks.  Scores are comparable
within one scorer only; downstream normalization handles the scale.
"""

from __future__ import annotations

from typing import Protocol, Sequence

from .errors import ModelError


class PassageScorer(Protocol):
    def score_batch(self, pairs: Sequence[tuple[str, str]]) -> list[float]: ...


class OverlapScorer:
    """Lexical overlap between query and passage (Jaccard on lowercase
    whitespace tokens).  Deterministic and dependency-free."""

    name = "overlap"

    def score_batch(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        scores = []
        for query, passage in pairs:
            q = set(query.lower().split())
            p = set(passage.lower().split())
            union = q | p
            scores.append(len(q & p) / len(union) if union else 0.0)
        return scores


class CrossEncoderScorer:
    """Sequence-classification re-ranker.

    The score is the model's raw relevance logit: the single output for
    one-label heads, otherwise the last-class logit (the convention for
    two-label relevance heads).
    """

    def __init__(self, model_name_or_path: str, max_length: int = 512,
                 batch_size: int = 16):
        try:
            import torch
            from transformers import (
                AutoModelForSequenceClassification,
                AutoTokenizer,
            )
        except ImportError as exc:  # pragma: no cover - deps are declared
            raise ModelError(f"transformers/torch unavailable: {exc}") from exc
        self._torch = torch
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model_name_or_path)
            self.model = AutoModelForSequenceClassification.from_pretrained(
                model_name_or_path
            )
        except Exception as exc:
            raise ModelError(
                f"could not load model {model_name_or_path!r}: {exc}"
            ) from exc
        self.model.eval()
        self.max_length = max_length
        self.batch_size = batch_size
        self.name = model_name_or_path

    def score_batch(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        torch = self._torch
        scores: list[float] = []
        for start in range(0, len(pairs), self.batch_size):
            chunk = pairs[start:start + self.batch_size]
            encoded = self.tokenizer(
                [q for q, _ in chunk],
                [p for _, p in chunk],
                truncation=True,
                max_length=self.max_length,
                padding=True,
                return_tensors="pt",
            )
            with torch.no_grad():
                logits = self.model(**encoded).logits
            if logits.shape[-1] == 1:
                scores.extend(logits.squeeze(-1).tolist())
            else:
                scores.extend(logits[:, -1].tolist())
        return scores


def load_scorer(model: str, max_length: int = 512, batch_size: int = 16) -> PassageScorer:
    """Resolve a scorer: the reserved name "overlap" gives the lexical
    stand-in, anything else is treated as a transformers checkpoint."""
    if model == "overlap":
        return OverlapScorer()
    return CrossEncoderScorer(model, max_length=max_length, batch_size=batch_size)
