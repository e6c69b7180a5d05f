"""Plain-text configuration: dotted key=value lines, '#' comments.

Every key is validated up front; unknown keys and out-of-range values are
rejected with the offending key named, before any work starts.  Precedence
is: command-line flags over config file over built-in defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .analysis import AnalyzerConfig, load_stopwords
from .errors import ConfigError
from .expansion import QlParams, RmParams
from .generation import GenerationConfig
from .index import Bm25Params


@dataclass
class Config:
    corpus_path: str = ""
    corpus_format: str = "jsonl"
    index_path: str = ""
    topics_path: str = ""
    topics_variant: str = "title"
    qrels_path: str = ""
    folds_path: str = ""
    stopwords_path: str = ""
    stemmer: str = "porter"
    lowercase: bool = True
    k1: float = 0.9
    b: float = 0.4
    fb_docs: int = 10
    fb_terms: int = 20
    original_query_weight: float = 0.5
    dirichlet_mu: float = 1000.0
    k_subtopics: int = 5
    g_rounds: int = 10
    temperature: float = 0.7
    top_p: float = 1.0
    frequency_penalty: float = 0.0
    presence_penalty: float = 0.0
    max_length: int = 512
    model_name: str = "gpt-3.5-turbo"
    provider: str = "replay"
    replay_path: str = ""
    base_url: str = ""
    pool_path: str = ""
    estimator: str = "uniform"
    scores_path: str = ""
    k_rase: int = 10
    run_path: str = ""
    run_depth: int = 1000
    expanded_dump_path: str = ""
    variance_path: str = ""
    grid_path: str = ""
    threads: int = 1
    raw: dict[str, str] = field(default_factory=dict)

    def analyzer(self) -> AnalyzerConfig:
        stopwords = None
        if self.stopwords_path:
            stopwords = load_stopwords(self.stopwords_path)
        try:
            if stopwords is None:
                return AnalyzerConfig(stemmer=self.stemmer, lowercase=self.lowercase)
            return AnalyzerConfig(
                stopwords=stopwords, stemmer=self.stemmer, lowercase=self.lowercase
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def bm25(self) -> Bm25Params:
        return _wrap("bm25", lambda: Bm25Params(k1=self.k1, b=self.b))

    def rm(self) -> RmParams:
        return _wrap(
            "rm",
            lambda: RmParams(
                fb_docs=self.fb_docs,
                fb_terms=self.fb_terms,
                original_query_weight=self.original_query_weight,
            ),
        )

    def ql(self) -> QlParams:
        return _wrap("ql", lambda: QlParams(dirichlet_mu=self.dirichlet_mu))

    def generation(self) -> GenerationConfig:
        return _wrap(
            "gen",
            lambda: GenerationConfig(
                k_subtopics=self.k_subtopics,
                g_rounds=self.g_rounds,
                temperature=self.temperature,
                top_p=self.top_p,
                frequency_penalty=self.frequency_penalty,
                presence_penalty=self.presence_penalty,
                max_length=self.max_length,
                model_name=self.model_name,
            ),
        )


def _wrap(prefix, factory):
    try:
        return factory()
    except ValueError as exc:
        raise ConfigError(f"{prefix}: {exc}") from exc


def _to_bool(key: str, value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _to_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from exc


def _to_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from exc


# config key -> (attribute, converter)
_KEYS: dict[str, tuple[str, object]] = {
    "corpus.path": ("corpus_path", str),
    "corpus.format": ("corpus_format", str),
    "index.path": ("index_path", str),
    "topics.path": ("topics_path", str),
    "topics.variant": ("topics_variant", str),
    "qrels.path": ("qrels_path", str),
    "folds.path": ("folds_path", str),
    "analyzer.stopwords": ("stopwords_path", str),
    "analyzer.stemmer": ("stemmer", str),
    "analyzer.lowercase": ("lowercase", _to_bool),
    "bm25.k1": ("k1", _to_float),
    "bm25.b": ("b", _to_float),
    "rm.fb_docs": ("fb_docs", _to_int),
    "rm.fb_terms": ("fb_terms", _to_int),
    "rm.original_query_weight": ("original_query_weight", _to_float),
    "ql.mu": ("dirichlet_mu", _to_float),
    "gen.k_subtopics": ("k_subtopics", _to_int),
    "gen.g_rounds": ("g_rounds", _to_int),
    "gen.temperature": ("temperature", _to_float),
    "gen.top_p": ("top_p", _to_float),
    "gen.frequency_penalty": ("frequency_penalty", _to_float),
    "gen.presence_penalty": ("presence_penalty", _to_float),
    "gen.max_length": ("max_length", _to_int),
    "gen.model": ("model_name", str),
    "gen.provider": ("provider", str),
    "gen.replay_path": ("replay_path", str),
    "gen.base_url": ("base_url", str),
    "gen.pool_path": ("pool_path", str),
    "rase.estimator": ("estimator", str),
    "rase.scores_path": ("scores_path", str),
    "rase.k_rase": ("k_rase", _to_int),
    "run.path": ("run_path", str),
    "run.depth": ("run_depth", _to_int),
    "run.expanded_dump": ("expanded_dump_path", str),
    "variance.path": ("variance_path", str),
    "tune.grid_path": ("grid_path", str),
    "threads": ("threads", _to_int),
}


def parse_config_text(text: str, source: str = "<config>") -> Config:
    config = Config()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        attr, converter = _KEYS[key]
        setattr(config, attr, converter(key, value) if converter is not str else value)
        config.raw[key] = value
    validate_config(config)
    return config


def load_config(path: str) -> Config:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config_text(fh.read(), source=path)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc


def validate_config(config: Config) -> None:
    """Range and enum checks for everything a command might touch."""
    if config.corpus_format not in ("jsonl", "trectext"):
        raise ConfigError(f"corpus.format: unknown format {config.corpus_format!r}")
    if config.topics_variant not in ("title", "description"):
        raise ConfigError(f"topics.variant: must be title or description")
    if config.stemmer not in ("porter", "none"):
        raise ConfigError(f"analyzer.stemmer: unknown stemmer {config.stemmer!r}")
    if config.k1 < 0:
        raise ConfigError(f"bm25.k1: must be >= 0, got {config.k1}")
    if not 0.0 <= config.b <= 1.0:
        raise ConfigError(f"bm25.b: must be in [0, 1], got {config.b}")
    if config.fb_docs < 1:
        raise ConfigError(f"rm.fb_docs: must be >= 1, got {config.fb_docs}")
    if config.fb_terms < 1:
        raise ConfigError(f"rm.fb_terms: must be >= 1, got {config.fb_terms}")
    if not 0.0 <= config.original_query_weight <= 1.0:
        raise ConfigError(
            f"rm.original_query_weight: must be in [0, 1], got {config.original_query_weight}"
        )
    if config.dirichlet_mu <= 0:
        raise ConfigError(f"ql.mu: must be > 0, got {config.dirichlet_mu}")
    if config.k_subtopics < 1:
        raise ConfigError(f"gen.k_subtopics: must be >= 1, got {config.k_subtopics}")
    if config.g_rounds < 1:
        raise ConfigError(f"gen.g_rounds: must be >= 1, got {config.g_rounds}")
    if config.max_length < 1:
        raise ConfigError(f"gen.max_length: must be >= 1, got {config.max_length}")
    if config.provider not in ("replay", "live"):
        raise ConfigError(f"gen.provider: must be replay or live, got {config.provider!r}")
    if config.estimator not in ("uniform", "bm25", "external", "gold"):
        raise ConfigError(f"rase.estimator: unknown estimator {config.estimator!r}")
    if config.k_rase < 1:
        raise ConfigError(f"rase.k_rase: must be >= 1, got {config.k_rase}")
    if config.run_depth < 1:
        raise ConfigError(f"run.depth: must be >= 1, got {config.run_depth}")
    if config.threads < 1:
        raise ConfigError(f"threads: must be >= 1, got {config.threads}")
