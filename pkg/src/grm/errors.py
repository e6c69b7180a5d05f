"""Exception hierarchy shared across the package.

Every error carries a short machine-parseable ``category`` used by the CLI
for its one-line failure output.
"""

from __future__ import annotations


class GrmError(Exception):
    """Base class for all package errors."""

    category = "error"


class ConfigError(GrmError):
    """Invalid or missing configuration value; message names the key."""

    category = "config"


class FormatError(GrmError):
    """Malformed input file (corpus, index, run, qrels, scores, folds)."""

    category = "format"


class DuplicateDocidError(FormatError):
    """A docid occurred more than once while building an index."""

    def __init__(self, docid: str):
        super().__init__(f"duplicate docid: {docid!r}")
        self.docid = docid


class DocumentNotFoundError(GrmError):
    category = "notfound"

    def __init__(self, docid: str):
        super().__init__(f"unknown docid: {docid!r}")
        self.docid = docid


class GenerationError(GrmError):
    """Document generation failed (provider failure, empty completion)."""

    category = "generation"

    def __init__(self, message: str, qid: str | None = None):
        super().__init__(message if qid is None else f"qid {qid}: {message}")
        self.qid = qid


class SubtopicParseError(GenerationError):
    """Completion did not contain enough parseable subtopic list items."""

    def __init__(self, message: str, qid: str | None = None, completion: str = ""):
        super().__init__(message, qid)
        self.completion = completion


class ExternalScoreMissingError(GrmError):
    """A (qid, docid) pair has no entry in the external scores source."""

    category = "estimator"

    def __init__(self, qid: str, docid: str):
        super().__init__(f"no external score for qid {qid!r}, docid {docid!r}")
        self.qid = qid
        self.docid = docid


class ContractViolationError(GrmError):
    """A documented precondition was violated by the caller."""

    category = "contract"
