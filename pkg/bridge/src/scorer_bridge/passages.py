"""Sliding-window passage segmentation.

Documents are split on whitespace into fixed-length token windows with a
configurable stride (default 256 tokens, stride 128 = 50% overlap); the
model's own tokenizer handles any further subword truncation.  A document
shorter than one window is a single passage; an empty document yields one
empty passage so every pair still receives a score.
"""

from __future__ import annotations


def split_passages(document: str, passage_tokens: int = 256, stride: int = 128) -> list[str]:
    if passage_tokens < 1:
        raise ValueError(f"passage_tokens must be >= 1, got {passage_tokens}")
    if not 1 <= stride <= passage_tokens:
        raise ValueError(
            f"stride must be in [1, passage_tokens], got {stride}"
        )
    tokens = document.split()
    if len(tokens) <= passage_tokens:
        return [" ".join(tokens)]
    passages = []
    start = 0
    while True:
        window = tokens[start:start + passage_tokens]
        passages.append(" ".join(window))
        if start + passage_tokens >= len(tokens):
            return passages
        start += stride
