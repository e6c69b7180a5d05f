import json
import os

import pytest

from grm.errors import FormatError, GenerationError, SubtopicParseError
from grm.generation import (
    ChatRequest,
    GeneratedDocument,
    GenerationConfig,
    RecordingProvider,
    ReplayProvider,
    Topic,
    generate_document,
    generate_pool,
    generate_subtopics,
    parse_subtopic_list,
    read_pool,
    read_topics,
)

from conftest import data_path

DEMO_CONFIG = GenerationConfig(k_subtopics=2, g_rounds=2, model_name="scripted-demo")
FULL_CONFIG = GenerationConfig(model_name="scripted-demo")  # K=5, G=10
T01 = Topic(qid="t01", text="bitcoin digital currency adoption")


class FakeProvider:
    """Minimal in-memory provider for behavioral tests."""

    def __init__(self, completions):
        self.completions = list(completions)
        self.requests = []

    def complete(self, request):
        self.requests.append(request)
        if not self.completions:
            raise GenerationError("provider exhausted")
        return self.completions.pop(0)


@pytest.fixture()
def replay():
    return ReplayProvider(data_path("replay.jsonl"))


# ---------------------------------------------------------------------------
# topics file
# ---------------------------------------------------------------------------


def test_read_topics(tmp_path):
    path = tmp_path / "topics.tsv"
    path.write_text("q1\tfirst query\nq2\tsecond query\n")
    topics = read_topics(str(path), variant="description")
    assert [(t.qid, t.text, t.variant) for t in topics] == [
        ("q1", "first query", "description"),
        ("q2", "second query", "description"),
    ]


def test_read_topics_rejects_duplicates_and_bad_rows(tmp_path):
    path = tmp_path / "topics.tsv"
    path.write_text("q1\tfirst\nq1\tagain\n")
    with pytest.raises(FormatError, match="duplicate"):
        read_topics(str(path))
    path.write_text("no-tab-here\n")
    with pytest.raises(FormatError, match="qid<TAB>text"):
        read_topics(str(path))


def test_topic_validation():
    with pytest.raises(FormatError):
        Topic(qid="q", text="   ")
    with pytest.raises(FormatError):
        Topic(qid="q", text="fine", variant="narrative")


# ---------------------------------------------------------------------------
# request keys
# ---------------------------------------------------------------------------


def test_request_key_is_stable_and_sensitive():
    req = ChatRequest(
        model="m", messages=(("user", "hi"),), temperature=0.7, top_p=1.0,
        frequency_penalty=0.0, presence_penalty=0.0, max_tokens=64, round=1,
    )
    assert req.key() == req.key()
    assert len(req.key()) == 64
    bumped_round = ChatRequest(**{**req.__dict__, "round": 2})
    assert bumped_round.key() != req.key()
    new_text = ChatRequest(**{**req.__dict__, "messages": (("user", "hello"),)})
    assert new_text.key() != req.key()
    warmer = ChatRequest(**{**req.__dict__, "temperature": 0.9})
    assert warmer.key() != req.key()


# ---------------------------------------------------------------------------
# subtopic parsing
# ---------------------------------------------------------------------------


def test_parse_numbered_list():
    completion = (
        "1. Environmental cost\n2. Payment costs\n3. Lack of privacy\n"
        "4. Regulation\n5. Volatility"
    )
    assert parse_subtopic_list(completion, 5) == [
        "Environmental cost", "Payment costs", "Lack of privacy",
        "Regulation", "Volatility",
    ]


def test_parse_accepts_parens_and_dashes():
    assert parse_subtopic_list("1) alpha\n- beta\n2. gamma", 3) == [
        "alpha", "beta", "gamma",
    ]


def test_parse_skips_reasoning_prose():
    completion = "These angles matter most.\nHere is the list:\n1. one\n2. two"
    assert parse_subtopic_list(completion, 2) == ["one", "two"]


def test_parse_keeps_final_items_when_extra():
    completion = "1. draft\n1. alpha\n2. beta"
    assert parse_subtopic_list(completion, 2) == ["alpha", "beta"]


def test_parse_too_few_items_is_an_error():
    with pytest.raises(SubtopicParseError) as err:
        parse_subtopic_list("1. only item\nno more lists", 5)
    assert err.value.completion.startswith("1. only item")


# ---------------------------------------------------------------------------
# providers
# ---------------------------------------------------------------------------


def test_replay_is_byte_identical(replay):
    first = generate_subtopics(T01, DEMO_CONFIG, replay, round_no=1)
    second = generate_subtopics(T01, DEMO_CONFIG, replay, round_no=1)
    assert first == second
    assert len(first) == 2
    assert all(isinstance(s, str) and s for s in first)


def test_replay_missing_fixture_is_an_error(replay):
    stranger = Topic(qid="zz", text="a query that was never recorded")
    with pytest.raises(GenerationError, match="zz"):
        generate_subtopics(stranger, DEMO_CONFIG, replay)


def test_replay_rejects_corrupt_file(tmp_path):
    path = tmp_path / "replay.jsonl"
    path.write_text("{broken\n")
    with pytest.raises(FormatError):
        ReplayProvider(str(path))


def test_recording_round_trips_through_replay(tmp_path):
    fake = FakeProvider(["1. alpha\n2. beta"])
    record_path = str(tmp_path / "rec.jsonl")
    recorder = RecordingProvider(fake, record_path)
    subs = generate_subtopics(T01, DEMO_CONFIG, recorder)
    record = json.loads(open(record_path).read().splitlines()[0])
    assert record["completion"] == "1. alpha\n2. beta"
    assert record["model"] == "scripted-demo"
    assert any("Topic: " in m["content"] for m in record["messages"])
    replayed = ReplayProvider(record_path)
    assert generate_subtopics(T01, DEMO_CONFIG, replayed) == subs


def test_subtopic_parse_error_carries_qid_and_completion():
    fake = FakeProvider(["no list at all"])
    with pytest.raises(SubtopicParseError) as err:
        generate_subtopics(T01, DEMO_CONFIG, fake)
    assert err.value.qid == "t01"
    assert err.value.completion == "no list at all"


# ---------------------------------------------------------------------------
# documents and pools
# ---------------------------------------------------------------------------


def test_generate_document_rejects_whitespace_completion():
    fake = FakeProvider(["   \n  "])
    with pytest.raises(GenerationError, match="empty"):
        generate_document(T01, "mining", DEMO_CONFIG, fake)


def test_generate_document_rejects_empty_subtopic():
    with pytest.raises(GenerationError):
        generate_document(T01, "  ", DEMO_CONFIG, FakeProvider([]))


def test_generated_document_key():
    doc = GeneratedDocument(qid="q", round=3, subtopic_index=2, subtopic="s", text="x")
    assert doc.gen_key == ("q", 3, 2)


def test_pool_size_is_k_times_g(replay):
    pool = generate_pool(T01, FULL_CONFIG, replay)
    assert len(pool) == 50
    assert len({d.gen_key for d in pool}) == 50
    assert {(d.round, d.subtopic_index) for d in pool} == {
        (r, i) for r in range(1, 11) for i in range(1, 6)
    }


def test_pool_of_one():
    fake = FakeProvider(["1. single angle", "a short generated document"])
    pool = generate_pool(T01, GenerationConfig(k_subtopics=1, g_rounds=1), fake)
    assert len(pool) == 1
    assert pool[0].subtopic == "single angle"


def test_pool_resumes_without_duplicates(tmp_path, replay):
    cache = str(tmp_path / "pool.jsonl")
    full = generate_pool(T01, FULL_CONFIG, replay, cache)
    lines = open(cache).read().splitlines()
    assert len(lines) == 50

    # simulate an interruption after 23 documents
    open(cache, "w").write("\n".join(lines[:23]) + "\n")
    resumed = generate_pool(T01, FULL_CONFIG, replay, cache)
    assert [d.gen_key for d in resumed] == [d.gen_key for d in full]
    new_lines = open(cache).read().splitlines()
    assert len(new_lines) == 50
    assert new_lines[:23] == lines[:23]
    assert sorted(new_lines) == sorted(lines)


def test_pool_cache_entries_are_self_describing(tmp_path, replay):
    cache = str(tmp_path / "pool.jsonl")
    generate_pool(T01, DEMO_CONFIG, replay, cache)
    record = json.loads(open(cache).read().splitlines()[0])
    assert set(record) == {
        "qid", "round", "subtopic_index", "subtopic", "text", "prompt", "model",
    }
    assert record["model"] == "scripted-demo"
    assert record["subtopic"] in record["prompt"]


def test_read_pool_filters_by_qid():
    docs = read_pool(data_path("pool_demo.jsonl"), qid="t03")
    assert docs and all(d.qid == "t03" for d in docs)
    everything = read_pool(data_path("pool_demo.jsonl"))
    assert {d.qid for d in everything} == {"t01", "t03", "t08"}


def test_read_pool_rejects_duplicates(tmp_path):
    path = tmp_path / "pool.jsonl"
    entry = {"qid": "q", "round": 1, "subtopic_index": 1, "subtopic": "s", "text": "x"}
    path.write_text(json.dumps(entry) + "\n" + json.dumps(entry) + "\n")
    with pytest.raises(FormatError, match="duplicate"):
        read_pool(str(path))


def test_config_validation():
    with pytest.raises(ValueError):
        GenerationConfig(k_subtopics=0)
    with pytest.raises(ValueError):
        GenerationConfig(g_rounds=0)
    assert GenerationConfig().pool_size == 50


@pytest.mark.skipif(
    not os.environ.get("GRM_LIVE_SMOKE"),
    reason="live provider smoke test; set GRM_LIVE_SMOKE=1 and GRM_API_KEY to run",
)
def test_live_provider_smoke():
    from grm.generation import LiveChatProvider

    provider = LiveChatProvider(os.environ["GRM_BASE_URL"])
    doc = generate_document(T01, "mining energy demand", GenerationConfig(), provider)
    assert doc.text
