"""Document retrieval with generative relevance modeling.

Queries are expanded with LLM-generated documents whose feedback weight is
the estimated relevance of the real collection documents most similar to
them.  The package also ships the classic building blocks the method sits
on: a BM25 inverted index, RM3 pseudo-relevance feedback, TREC-style
evaluation and cross-validated grid tuning.
"""

from .analysis import AnalyzerConfig, analyze, porter_stem
from .corpus import Document, read_corpus, read_jsonl, read_trectext
from .errors import (
    ConfigError,
    ContractViolationError,
    DocumentNotFoundError,
    DuplicateDocidError,
    ExternalScoreMissingError,
    FormatError,
    GenerationError,
    GrmError,
    SubtopicParseError,
)
from .expansion import (
    ExpandedQuery,
    QlParams,
    RmParams,
    execute_expanded,
    grm_expand,
    interpolate,
    mle_model,
    query_likelihood,
    relevance_model,
    rm3_expand,
    truncate_and_renormalize,
)
from .generation import (
    ChatRequest,
    GeneratedDocument,
    GenerationConfig,
    LiveChatProvider,
    RecordingProvider,
    ReplayProvider,
    Topic,
    generate_document,
    generate_pool,
    generate_subtopics,
    read_pool,
    read_topics,
)
from .index import (
    Bm25Params,
    InvertedIndex,
    ScoredDoc,
    bm25_search,
    build_index,
    doc_as_query_search,
    doc_language_model,
    load_index,
    save_index,
    score_document,
)
from .rase import (
    EstimatorSources,
    NeighborSet,
    RaseWeight,
    dcg_aggregate,
    dump_scorer_pairs,
    estimate_relevance,
    load_external_scores,
    normalize_scores,
    rase_weights,
    retrieve_neighbors,
)
from .evaluation import (
    MetricReport,
    RunEntry,
    average_precision,
    evaluate_run,
    ndcg,
    paired_t_test,
    read_qrels,
    read_run,
    recall_at_k,
    variance_analysis,
    write_run,
    write_variance_csv,
)
from .tuning import FoldSpec, Grid, TuneResult, cross_validate, read_folds, read_grid

__version__ = "0.1.0"
