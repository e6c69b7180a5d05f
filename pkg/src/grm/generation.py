"""LLM document generation with a deterministic replay mode.

For each topic we run G rounds; each round asks the chat provider for K
subtopics of the query, then writes one document per subtopic, yielding a
pool of N = K x G generated documents.  Every request is identified by a
content hash so completions can be recorded once and replayed byte-for-byte,
keeping the whole downstream pipeline offline and reproducible.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import time
from dataclasses import dataclass, field
from typing import Iterable, Protocol

from .errors import FormatError, GenerationError, SubtopicParseError

log = logging.getLogger(__name__)

API_KEY_ENV = "GRM_API_KEY"


@dataclass(frozen=True)
class Topic:
    qid: str
    text: str
    variant: str = "title"  # "title" or "description"

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise FormatError(f"topic {self.qid!r} has empty text")
        if self.variant not in ("title", "description"):
            raise FormatError(f"topic {self.qid!r}: unknown variant {self.variant!r}")


def read_topics(path: str, variant: str = "title") -> list[Topic]:
    """Read a TSV topics file: "qid<TAB>query text" per line."""
    topics: list[Topic] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t", 1)
            if len(parts) != 2:
                raise FormatError(f"{path}:{lineno}: expected 'qid<TAB>text'")
            qid, text = parts[0].strip(), parts[1].strip()
            if qid in seen:
                raise FormatError(f"{path}:{lineno}: duplicate qid {qid!r}")
            seen.add(qid)
            topics.append(Topic(qid=qid, text=text, variant=variant))
    return topics


@dataclass(frozen=True)
class GenerationConfig:
    k_subtopics: int = 5
    g_rounds: int = 10
    temperature: float = 0.7
    top_p: float = 1.0
    frequency_penalty: float = 0.0
    presence_penalty: float = 0.0
    max_length: int = 512
    model_name: str = "gpt-3.5-turbo"

    def __post_init__(self) -> None:
        if self.k_subtopics < 1:
            raise ValueError(f"gen.k_subtopics must be >= 1, got {self.k_subtopics}")
        if self.g_rounds < 1:
            raise ValueError(f"gen.g_rounds must be >= 1, got {self.g_rounds}")
        if self.max_length < 1:
            raise ValueError(f"gen.max_length must be >= 1, got {self.max_length}")

    @property
    def pool_size(self) -> int:
        return self.k_subtopics * self.g_rounds


@dataclass(frozen=True)
class GeneratedDocument:
    qid: str
    round: int
    subtopic_index: int
    subtopic: str
    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise GenerationError("generated document text is empty", self.qid)

    @property
    def gen_key(self) -> tuple[str, int, int]:
        return (self.qid, self.round, self.subtopic_index)


@dataclass(frozen=True)
class ChatRequest:
    """One chat-completion request plus the round salt that keys its cache slot."""

    model: str
    messages: tuple[tuple[str, str], ...]  # ((role, content), ...)
    temperature: float
    top_p: float
    frequency_penalty: float
    presence_penalty: float
    max_tokens: int
    round: int = 0

    def key(self) -> str:
        payload = json.dumps(
            {
                "model": self.model,
                "messages": [{"role": r, "content": c} for r, c in self.messages],
                "temperature": self.temperature,
                "top_p": self.top_p,
                "frequency_penalty": self.frequency_penalty,
                "presence_penalty": self.presence_penalty,
                "max_tokens": self.max_tokens,
                "round": self.round,
            },
            sort_keys=True,
            ensure_ascii=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ChatProvider(Protocol):
    def complete(self, request: ChatRequest) -> str: ...


class ReplayProvider:
    """Serves recorded completions keyed by request hash; fully offline.

    Safe for concurrent reads.  A request without a recorded completion is a
    hard error: replay mode never silently falls through to the network.
    """

    def __init__(self, path: str):
        self.path = path
        self._completions: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise FormatError(f"{path}:{lineno}: corrupt replay record") from exc
                self._completions[record["key"]] = record["completion"]

    def complete(self, request: ChatRequest) -> str:
        key = request.key()
        if key not in self._completions:
            raise GenerationError(f"no replay fixture for request {key[:12]}…")
        return self._completions[key]


class RecordingProvider:
    """Wraps a provider and appends each (request, completion) to a JSONL file.

    Records carry the full message list and sampling parameters, so the
    resulting file is a self-describing replay fixture.
    """

    def __init__(self, inner: ChatProvider, path: str):
        self.inner = inner
        self.path = path

    def complete(self, request: ChatRequest) -> str:
        completion = self.inner.complete(request)
        record = {
            "key": request.key(),
            "model": request.model,
            "messages": [{"role": r, "content": c} for r, c in request.messages],
            "params": {
                "temperature": request.temperature,
                "top_p": request.top_p,
                "frequency_penalty": request.frequency_penalty,
                "presence_penalty": request.presence_penalty,
                "max_tokens": request.max_tokens,
            },
            "round": request.round,
            "completion": completion,
        }
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
        return completion


class LiveChatProvider:
    """HTTP chat-completion client (OpenAI-style endpoint).

    The credential is read from the GRM_API_KEY environment variable and is
    never written to disk.  Transient failures (connection errors, 429, 5xx)
    are retried up to ``max_retries`` times with exponential backoff, and a
    fixed minimum delay is kept between consecutive requests.
    """

    def __init__(
        self,
        base_url: str,
        *,
        timeout: float = 60.0,
        max_retries: int = 5,
        min_interval: float = 0.5,
    ):
        api_key = os.environ.get(API_KEY_ENV)
        if not api_key:
            raise GenerationError(f"{API_KEY_ENV} is not set; cannot use the live provider")
        self.base_url = base_url.rstrip("/")
        self._api_key = api_key
        self.timeout = timeout
        self.max_retries = max_retries
        self.min_interval = min_interval
        self._last_request = 0.0

    def complete(self, request: ChatRequest) -> str:
        import requests

        body = {
            "model": request.model,
            "messages": [{"role": r, "content": c} for r, c in request.messages],
            "temperature": request.temperature,
            "top_p": request.top_p,
            "frequency_penalty": request.frequency_penalty,
            "presence_penalty": request.presence_penalty,
            "max_tokens": request.max_tokens,
        }
        headers = {"Authorization": f"Bearer {self._api_key}"}
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            wait = self.min_interval - (time.monotonic() - self._last_request)
            if wait > 0:
                time.sleep(wait)
            self._last_request = time.monotonic()
            try:
                resp = requests.post(
                    f"{self.base_url}/chat/completions",
                    json=body,
                    headers=headers,
                    timeout=self.timeout,
                )
                if resp.status_code == 429 or resp.status_code >= 500:
                    raise GenerationError(f"provider returned HTTP {resp.status_code}")
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except Exception as exc:  # noqa: BLE001 - every failure is retried
                last_error = exc
                if attempt < self.max_retries:
                    time.sleep(min(2.0**attempt, 30.0))
        raise GenerationError(
            f"provider failed after {self.max_retries} retries: {last_error}"
        )


# ---------------------------------------------------------------------------
# Prompts
# ---------------------------------------------------------------------------

SUBTOPIC_SYSTEM = "You analyse search topics for a document retrieval system."

SUBTOPIC_TEMPLATE = """A complex search topic covers several distinct subtopics. Given a topic, \
briefly reason about the angles it involves, then list the subtopics.

Example topic: What obstacles does high-speed rail face to becoming a common way to travel between cities?
Reasoning: The topic spans engineering, economics and policy, so the subtopics should cover each angle.
Subtopics:
1. Construction cost
2. Land acquisition
3. Ticket pricing
4. Safety regulation
5. Network coverage

Now do the same for the following topic. First give one or two sentences of \
reasoning, then list exactly {k} subtopics as a numbered list, one per line.
Topic: {query}"""

DOCUMENT_SYSTEM = "You write short, factual, informative documents."

DOCUMENT_TEMPLATE = """Write a document that could appear in a news or reference collection.
It must be about the subtopic below, in the context of the overall topic.
Write flowing prose, no headings or lists.

Topic: {query}
Subtopic: {subtopic}

Document:"""

_LIST_ITEM = re.compile(r"^\s*(?:\d+\s*[.)]|-)\s*(\S.*?)\s*$")


def parse_subtopic_list(completion: str, k: int) -> list[str]:
    """Extract subtopics from a numbered-list completion.

    Accepts "N.", "N)" and "-" markers.  The prompt asks for reasoning before
    the list, so when more than ``k`` items parse, the final ``k`` are kept.
    Fewer than ``k`` parseable items is a parse error.
    """
    items = []
    for line in completion.splitlines():
        match = _LIST_ITEM.match(line)
        if match:
            items.append(match.group(1))
    if len(items) < k:
        raise SubtopicParseError(
            f"expected {k} subtopics, parsed {len(items)}", completion=completion
        )
    return items[-k:]


def _request(messages: tuple[tuple[str, str], ...], config: GenerationConfig, round_no: int) -> ChatRequest:
    return ChatRequest(
        model=config.model_name,
        messages=messages,
        temperature=config.temperature,
        top_p=config.top_p,
        frequency_penalty=config.frequency_penalty,
        presence_penalty=config.presence_penalty,
        max_tokens=config.max_length,
        round=round_no,
    )


def generate_subtopics(
    topic: Topic,
    config: GenerationConfig,
    provider: ChatProvider,
    round_no: int = 1,
) -> list[str]:
    """Ask the provider for k_subtopics subtopics of the query."""
    prompt = SUBTOPIC_TEMPLATE.format(k=config.k_subtopics, query=topic.text)
    messages = (("system", SUBTOPIC_SYSTEM), ("user", prompt))
    try:
        completion = provider.complete(_request(messages, config, round_no))
    except GenerationError as exc:
        raise GenerationError(str(exc), topic.qid) from exc
    try:
        return parse_subtopic_list(completion, config.k_subtopics)
    except SubtopicParseError as exc:
        raise SubtopicParseError(str(exc), topic.qid, completion) from exc


def generate_document(
    topic: Topic,
    subtopic: str,
    config: GenerationConfig,
    provider: ChatProvider,
    round_no: int = 1,
    subtopic_index: int = 1,
) -> GeneratedDocument:
    """Generate one document covering ``subtopic`` for the topic."""
    if not subtopic.strip():
        raise GenerationError("empty subtopic", topic.qid)
    prompt = DOCUMENT_TEMPLATE.format(query=topic.text, subtopic=subtopic)
    messages = (("system", DOCUMENT_SYSTEM), ("user", prompt))
    try:
        completion = provider.complete(_request(messages, config, round_no))
    except GenerationError as exc:
        raise GenerationError(str(exc), topic.qid) from exc
    text = completion.strip()
    if not text:
        raise GenerationError("provider returned an empty document", topic.qid)
    return GeneratedDocument(
        qid=topic.qid,
        round=round_no,
        subtopic_index=subtopic_index,
        subtopic=subtopic,
        text=text,
    )


def _document_prompt(topic: Topic, subtopic: str) -> str:
    return DOCUMENT_TEMPLATE.format(query=topic.text, subtopic=subtopic)


def append_pool_entry(doc: GeneratedDocument, topic: Topic, model: str, path: str) -> None:
    record = {
        "qid": doc.qid,
        "round": doc.round,
        "subtopic_index": doc.subtopic_index,
        "subtopic": doc.subtopic,
        "text": doc.text,
        "prompt": _document_prompt(topic, doc.subtopic),
        "model": model,
    }
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_pool(path: str, qid: str | None = None) -> list[GeneratedDocument]:
    """Load generated documents from a pool cache file, oldest first.

    Enforces (qid, round, subtopic_index) uniqueness.  With ``qid`` given,
    other topics' entries are skipped.
    """
    docs: list[GeneratedDocument] = []
    seen: set[tuple[str, int, int]] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: corrupt pool record") from exc
            if qid is not None and record.get("qid") != qid:
                continue
            doc = GeneratedDocument(
                qid=record["qid"],
                round=int(record["round"]),
                subtopic_index=int(record["subtopic_index"]),
                subtopic=record["subtopic"],
                text=record["text"],
            )
            if doc.gen_key in seen:
                raise FormatError(f"{path}:{lineno}: duplicate pool entry {doc.gen_key}")
            seen.add(doc.gen_key)
            docs.append(doc)
    return docs


def generate_pool(
    topic: Topic,
    config: GenerationConfig,
    provider: ChatProvider,
    cache_path: str | None = None,
) -> list[GeneratedDocument]:
    """Produce the full pool of K x G generated documents for one topic.

    Each round makes a fresh subtopic request (breadth) and writes one
    document per subtopic (depth).  With a cache path the pool is persisted
    as it is produced, and an interrupted run resumes without regenerating
    or duplicating any (round, subtopic_index) slot.
    """
    existing: dict[tuple[int, int], GeneratedDocument] = {}
    if cache_path is not None and os.path.exists(cache_path):
        for doc in read_pool(cache_path, qid=topic.qid):
            existing[(doc.round, doc.subtopic_index)] = doc
    docs: list[GeneratedDocument] = []
    for round_no in range(1, config.g_rounds + 1):
        slots = [(round_no, i) for i in range(1, config.k_subtopics + 1)]
        if all(slot in existing for slot in slots):
            docs.extend(existing[slot] for slot in slots)
            continue
        subtopics = generate_subtopics(topic, config, provider, round_no)
        for i, subtopic in enumerate(subtopics, 1):
            if (round_no, i) in existing:
                docs.append(existing[(round_no, i)])
                continue
            doc = generate_document(topic, subtopic, config, provider, round_no, i)
            if cache_path is not None:
                append_pool_entry(doc, topic, config.model_name, cache_path)
            docs.append(doc)
    assert len(docs) == config.pool_size
    return docs


def generate_pools(
    topics: Iterable[Topic],
    config: GenerationConfig,
    provider: ChatProvider,
    cache_path: str,
) -> int:
    """Generate pools for every topic, appending to one cache file."""
    count = 0
    for topic in topics:
        docs = generate_pool(topic, config, provider, cache_path)
        count += len(docs)
        log.info("qid %s: pool of %d generated documents ready", topic.qid, len(docs))
    return count
