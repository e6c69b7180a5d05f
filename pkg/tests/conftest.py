import os

import pytest

from grm.corpus import read_jsonl
from grm.evaluation import read_qrels
from grm.generation import read_topics
from grm.index import build_index

DATA = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")


def data_path(name: str) -> str:
    return os.path.join(DATA, name)


@pytest.fixture(scope="session")
def mini_docs():
    return list(read_jsonl(data_path("mini_corpus.jsonl")))


@pytest.fixture(scope="session")
def mini_index(mini_docs):
    return build_index(mini_docs)


@pytest.fixture(scope="session")
def mini_topics():
    return read_topics(data_path("topics.tsv"))


@pytest.fixture(scope="session")
def mini_qrels():
    return read_qrels(data_path("qrels.txt"))


def demo_config_text(workdir: str, estimator: str = "external") -> str:
    """Config for the offline demo pipeline, with outputs under ``workdir``."""
    lines = [
        f"corpus.path = {data_path('mini_corpus.jsonl')}",
        f"index.path = {os.path.join(workdir, 'demo.idx')}",
        f"topics.path = {data_path('demo_topics.tsv')}",
        f"qrels.path = {data_path('qrels.txt')}",
        "gen.provider = replay",
        f"gen.replay_path = {data_path('replay.jsonl')}",
        "gen.model = scripted-demo",
        "gen.k_subtopics = 2",
        "gen.g_rounds = 2",
        f"gen.pool_path = {os.path.join(workdir, 'pool.jsonl')}",
        f"rase.estimator = {estimator}",
        f"rase.scores_path = {data_path('scores_demo.tsv')}",
        "rase.k_rase = 10",
        f"run.path = {os.path.join(workdir, 'demo.run')}",
        f"variance.path = {os.path.join(workdir, 'variance.csv')}",
    ]
    return "\n".join(lines) + "\n"
