"""Pairs and scores TSV formats.

Input rows are "qid<TAB>docid<TAB>query<TAB>document"; tab, newline and
backslash inside the text fields are escaped as \\t, \\n and \\\\.  Output
rows are "qid<TAB>docid<TAB>score", one per input row, in input order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import FormatError


@dataclass(frozen=True)
class ScoreRequest:
    qid: str
    docid: str
    query: str
    document: str


def unescape(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            if nxt == "t":
                out.append("\t")
                i += 2
                continue
            if nxt == "n":
                out.append("\n")
                i += 2
                continue
            if nxt == "\\":
                out.append("\\")
                i += 2
                continue
        out.append(ch)
        i += 1
    return "".join(out)


def escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def read_pairs(path: str) -> list[ScoreRequest]:
    pairs: list[ScoreRequest] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise FormatError(
                    f"{path}:{lineno}: expected 4 tab-separated fields, got {len(parts)}"
                )
            qid, docid, query, document = parts
            if not qid or not docid:
                raise FormatError(f"{path}:{lineno}: empty qid or docid")
            pairs.append(ScoreRequest(qid, docid, unescape(query), unescape(document)))
    return pairs


def write_pairs(pairs: Iterable[ScoreRequest], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(f"{p.qid}\t{p.docid}\t{escape(p.query)}\t{escape(p.document)}\n")


def write_scores(rows: Sequence[tuple[str, str, float]], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for qid, docid, score in rows:
            fh.write(f"{qid}\t{docid}\t{score:.6f}\n")
