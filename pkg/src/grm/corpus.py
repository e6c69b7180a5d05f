"""Collection ingestion: JSONL corpora and a minimal TRECTEXT reader."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterator

from .errors import FormatError


@dataclass(frozen=True)
class Document:
    """One collection document. ``body`` may be empty only if ``title`` is not."""

    docid: str
    body: str
    title: str = ""

    def __post_init__(self) -> None:
        if not self.docid:
            raise FormatError("document with empty docid")
        if not self.body and not self.title:
            raise FormatError(f"docid {self.docid!r}: both title and body empty")

    @property
    def text(self) -> str:
        return f"{self.title} {self.body}".strip() if self.title else self.body


def read_jsonl(path: str) -> Iterator[Document]:
    """Yield documents from a JSONL file: {"docid", "body", "title"?} per line.

    Raises FormatError naming the offending line number on corrupt input.
    """
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict) or "docid" not in obj:
                raise FormatError(f"{path}:{lineno}: object with a 'docid' field required")
            try:
                yield Document(
                    docid=str(obj["docid"]),
                    body=str(obj.get("body", "")),
                    title=str(obj.get("title", "")),
                )
            except FormatError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc


_DOC = re.compile(r"<DOC>(.*?)</DOC>", re.DOTALL)
_DOCNO = re.compile(r"<DOCNO>\s*(.*?)\s*</DOCNO>", re.DOTALL)
_TEXT = re.compile(r"<TEXT>(.*?)</TEXT>", re.DOTALL)


def read_trectext(path: str) -> Iterator[Document]:
    """Yield documents from a legacy TRECTEXT file.

    Recognizes <DOC><DOCNO>...</DOCNO><TEXT>...</TEXT></DOC> blocks; all
    <TEXT> sections of a document are concatenated.
    """
    with open(path, encoding="utf-8", errors="replace") as fh:
        data = fh.read()
    found = False
    for block in _DOC.finditer(data):
        found = True
        chunk = block.group(1)
        docno = _DOCNO.search(chunk)
        if docno is None:
            raise FormatError(f"{path}: <DOC> block without <DOCNO>")
        texts = _TEXT.findall(chunk)
        body = "\n".join(t.strip() for t in texts).strip()
        yield Document(docid=docno.group(1), body=body)
    if not found and data.strip():
        raise FormatError(f"{path}: no <DOC> blocks found")


def read_corpus(path: str, fmt: str = "jsonl") -> Iterator[Document]:
    if fmt == "jsonl":
        return read_jsonl(path)
    if fmt == "trectext":
        return read_trectext(path)
    raise FormatError(f"unknown corpus format {fmt!r}")
