"""Command-line pipeline driver.

Subcommands: index, generate, run, eval, tune, variance.  Every command is
deterministic given identical inputs (bit-identical output files), except
live generation.  Failures exit nonzero with a single machine-parseable
line on stderr: "error: <category>: <message>".
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor

from filelock import FileLock

from . import evaluation, expansion, generation, rase, tuning
from .config import Config, load_config
from .corpus import read_corpus
from .errors import ConfigError, GrmError
from .index import Bm25Params, build_index, load_index, save_index


def _require(value: str, key: str) -> str:
    if not value:
        raise ConfigError(f"{key}: required but not set")
    return value


def _output_lock(path: str) -> FileLock:
    # Advisory lock so concurrent invocations never interleave on one file.
    return FileLock(path + ".lock")


def params_tag(method: str, params: dict) -> str:
    """Run tag: method plus the first 8 hex chars of the sha256 of the
    canonical parameter string "k=v;..." with keys sorted."""
    canonical = ";".join(f"{k}={params[k]}" for k in sorted(params))
    digest = hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:8]
    return f"{method}-{digest}"


def _provider(config: Config) -> generation.ChatProvider:
    if config.provider == "replay":
        path = _require(config.replay_path, "gen.replay_path")
        return generation.ReplayProvider(path)
    base_url = _require(config.base_url, "gen.base_url")
    live = generation.LiveChatProvider(base_url)
    if config.replay_path:
        # record live completions so a later run can replay them
        return generation.RecordingProvider(live, config.replay_path)
    return live


def _estimator_sources(config: Config, index) -> rase.EstimatorSources:
    if config.estimator == "bm25":
        return rase.EstimatorSources(index=index, params=config.bm25())
    if config.estimator == "external":
        path = _require(config.scores_path, "rase.scores_path")
        return rase.EstimatorSources(scores=rase.load_external_scores(path))
    if config.estimator == "gold":
        path = _require(config.qrels_path, "qrels.path")
        return rase.EstimatorSources(qrels=evaluation.read_qrels(path))
    return rase.EstimatorSources()


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_index(config: Config, args: argparse.Namespace) -> int:
    corpus_path = _require(config.corpus_path, "corpus.path")
    out = args.output or _require(config.index_path, "index.path")
    index = build_index(read_corpus(corpus_path, config.corpus_format), config.analyzer())
    with _output_lock(out):
        save_index(index, out)
    print(f"indexed {index.doc_count} documents "
          f"(avg_doc_length {index.avg_doc_length:.2f}) -> {out}")
    return 0


def cmd_generate(config: Config, args: argparse.Namespace) -> int:
    topics = generation.read_topics(
        _require(config.topics_path, "topics.path"), config.topics_variant
    )
    out = args.output or _require(config.pool_path, "gen.pool_path")
    provider = _provider(config)
    with _output_lock(out):
        count = generation.generate_pools(topics, config.generation(), provider, out)
    print(f"generated pool entries for {len(topics)} topics "
          f"({count} documents) -> {out}")
    return 0


def _grm_run_for_topic(topic, pool, index, config: Config, sources) -> list:
    weights = rase.rase_weights(
        pool, topic, index, config.bm25(), config.k_rase, config.estimator, sources
    )
    expanded = expansion.grm_expand(topic, pool, weights, config.rm(), index.analyzer)
    if config.expanded_dump_path:
        expansion.write_expanded_query(expanded, f"{config.expanded_dump_path}.{topic.qid}")
    return expansion.execute_expanded(expanded, index, config.bm25(), config.run_depth)


def cmd_run(config: Config, args: argparse.Namespace) -> int:
    method = args.method
    index = load_index(_require(config.index_path, "index.path"))
    topics = generation.read_topics(
        _require(config.topics_path, "topics.path"), config.topics_variant
    )
    out = args.output or _require(config.run_path, "run.path")
    bm25 = config.bm25()

    if method == "bm25":
        tag = params_tag(method, {"k1": bm25.k1, "b": bm25.b})

        def produce(topic):
            tokens = expansion.analyze(topic.text, index.analyzer)
            return expansion.bm25_search(tokens, index, bm25, config.run_depth)

    elif method == "rm3":
        rm, ql = config.rm(), config.ql()
        tag = params_tag(method, {
            "k1": bm25.k1, "b": bm25.b, "fb_docs": rm.fb_docs, "fb_terms": rm.fb_terms,
            "original_query_weight": rm.original_query_weight, "mu": ql.dirichlet_mu,
        })

        def produce(topic):
            expanded = expansion.rm3_expand(topic, index, bm25, rm, ql)
            if config.expanded_dump_path:
                expansion.write_expanded_query(
                    expanded, f"{config.expanded_dump_path}.{topic.qid}"
                )
            return expansion.execute_expanded(expanded, index, bm25, config.run_depth)

    elif method == "grm":
        rm = config.rm()
        pool_path = _require(config.pool_path, "gen.pool_path")
        sources = _estimator_sources(config, index)
        tag = params_tag(method, {
            "k1": bm25.k1, "b": bm25.b, "fb_docs": rm.fb_docs, "fb_terms": rm.fb_terms,
            "original_query_weight": rm.original_query_weight,
            "estimator": config.estimator, "k_rase": config.k_rase,
        })

        def produce(topic):
            pool = generation.read_pool(pool_path, qid=topic.qid)
            return _grm_run_for_topic(topic, pool, index, config, sources)

    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError(f"unknown method {method!r}")

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(produce, topics))
    else:
        results = [produce(topic) for topic in topics]
    run = {topic.qid: hits for topic, hits in zip(topics, results)}
    with _output_lock(out):
        evaluation.write_run(run, tag, out)
    print(f"wrote run for {len(run)} topics (tag {tag}) -> {out}")
    return 0


def _format_eval_table(reports, significance) -> str:
    lines = [f"{'run':<28} {'queries':>7} {'MAP':>8} {'nDCG':>8} {'R@1k':>8}"]
    for report in reports:
        marks = significance.get(report.tag, {})
        cells = []
        for metric in evaluation.METRICS:
            mark = "+" if marks.get(metric) else ""
            cells.append(f"{report.mean(metric):.4f}{mark:<1}")
        lines.append(
            f"{report.tag:<28} {report.query_count:>7} "
            f"{cells[0]:>8} {cells[1]:>8} {cells[2]:>8}"
        )
    return "\n".join(lines)


def cmd_eval(config: Config, args: argparse.Namespace) -> int:
    qrels = evaluation.read_qrels(args.qrels or _require(config.qrels_path, "qrels.path"))
    reports = []
    runs = {}
    for path in args.runs:
        run, tag = evaluation.read_run(path)
        tag = tag or path
        missing = sorted(set(qrels) - set(run))
        if missing:
            print(f"warning: run {tag} has no results for judged qids: "
                  f"{', '.join(missing)}", file=sys.stderr)
        report = evaluation.evaluate_run(run, qrels, tag=tag)
        runs[tag] = report
        reports.append(report)

    significance: dict[str, dict[str, bool]] = {}
    if args.baseline:
        base_run, base_tag = evaluation.read_run(args.baseline)
        baseline = evaluation.evaluate_run(base_run, qrels, tag=base_tag or "baseline")
        for report in reports:
            shared = sorted(set(report.per_query) & set(baseline.per_query))
            if len(shared) < 2:
                continue
            marks = {}
            for metric in evaluation.METRICS:
                a = [report.per_query[q][metric] for q in shared]
                b = [baseline.per_query[q][metric] for q in shared]
                _, p = evaluation.paired_t_test(a, b)
                mean_a = sum(a) / len(a)
                mean_b = sum(b) / len(b)
                marks[metric] = p < 0.05 and mean_a > mean_b
            significance[report.tag] = marks

    table = _format_eval_table(reports, significance)
    print(table)
    if args.output:
        with _output_lock(args.output):
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(table + "\n")
    return 0


def cmd_tune(config: Config, args: argparse.Namespace) -> int:
    index = load_index(_require(config.index_path, "index.path"))
    topics = generation.read_topics(
        _require(config.topics_path, "topics.path"), config.topics_variant
    )
    topics_by_qid = {t.qid: t for t in topics}
    qrels = evaluation.read_qrels(_require(config.qrels_path, "qrels.path"))
    folds = tuning.read_folds(_require(config.folds_path, "folds.path"))
    grid_path = args.grid or config.grid_path
    if grid_path:
        grid = tuning.read_grid(grid_path)
    elif args.method == "bm25":
        grid = tuning.Grid(dict(tuning.BM25_GRID))
    elif args.method == "rm3":
        grid = tuning.Grid(dict(tuning.RM3_GRID))
    else:
        grid = tuning.Grid(dict(tuning.GRM_GRID))

    producer = _make_producer(args.method, config, index, topics_by_qid)
    result = tuning.cross_validate(producer, grid, folds, qrels, tag=args.method)

    lines = []
    for outcome in result.per_fold:
        chosen = ", ".join(f"{k}={v}" for k, v in outcome.chosen.items())
        lines.append(
            f"fold {outcome.fold_id}: {chosen} "
            f"(train R@1k {outcome.train_recall:.4f}, "
            f"test R@1k {outcome.test_report.mean('recall_1000'):.4f})"
        )
    agg = result.aggregate
    lines.append(
        f"aggregate over {agg.query_count} queries: "
        f"MAP {agg.mean('map'):.4f}  nDCG {agg.mean('ndcg'):.4f}  "
        f"R@1k {agg.mean('recall_1000'):.4f}"
    )
    text = "\n".join(lines)
    print(text)
    if args.output:
        with _output_lock(args.output):
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
    return 0


def _make_producer(method: str, config: Config, index, topics_by_qid):
    bm25_defaults = config.bm25()

    def produce(point: dict, qids) -> dict:
        bm25 = Bm25Params(
            k1=float(point.get("k1", bm25_defaults.k1)),
            b=float(point.get("b", bm25_defaults.b)),
        )
        run = {}
        for qid in qids:
            topic = topics_by_qid.get(qid)
            if topic is None:
                raise ConfigError(f"folds reference unknown qid {qid!r}")
            if method == "bm25":
                tokens = expansion.analyze(topic.text, index.analyzer)
                hits = expansion.bm25_search(tokens, index, bm25, config.run_depth)
            elif method == "rm3":
                rm = expansion.RmParams(
                    fb_docs=int(point.get("fb_docs", config.fb_docs)),
                    fb_terms=int(point.get("fb_terms", config.fb_terms)),
                    original_query_weight=float(
                        point.get("original_query_weight", config.original_query_weight)
                    ),
                )
                expanded = expansion.rm3_expand(topic, index, bm25, rm, config.ql())
                hits = expansion.execute_expanded(expanded, index, bm25, config.run_depth)
            else:
                raise ConfigError(f"tuning method {method!r} not supported")
            run[qid] = [h.docid for h in hits]
        return run

    return produce


def cmd_variance(config: Config, args: argparse.Namespace) -> int:
    index = load_index(_require(config.index_path, "index.path"))
    topics = generation.read_topics(
        _require(config.topics_path, "topics.path"), config.topics_variant
    )
    qrels = evaluation.read_qrels(_require(config.qrels_path, "qrels.path"))
    pool_path = _require(config.pool_path, "gen.pool_path")
    out = args.output or _require(config.variance_path, "variance.path")
    rows = []
    skipped = []
    for topic in topics:
        if not any(g >= 1 for g in qrels.get(topic.qid, {}).values()):
            skipped.append(topic.qid)
            continue
        pool = generation.read_pool(pool_path, qid=topic.qid)
        topic_rows, failures = evaluation.variance_analysis(
            topic, pool, index, config.bm25(), qrels, config.rm()
        )
        rows.extend(topic_rows)
        for gen_key, message in failures:
            print(f"warning: {gen_key}: {message}", file=sys.stderr)
    if skipped:
        print(f"warning: skipped topics with no relevant documents: "
              f"{', '.join(skipped)}", file=sys.stderr)
    with _output_lock(out):
        evaluation.write_variance_csv(rows, out)
    print(f"wrote {len(rows)} variance rows -> {out}")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    # Global flags are accepted both before and after the subcommand; the
    # SUPPRESS default keeps a pre-subcommand value from being overwritten.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS,
                        help="path to a key=value config file")
    common.add_argument("--output", default=argparse.SUPPRESS,
                        help="override the command's output path")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="worker threads for per-topic stages")

    parser = argparse.ArgumentParser(
        prog="grm",
        description="Document retrieval with generative relevance modeling.",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("index", parents=[common],
                   help="build and persist the inverted index")
    sub.add_parser("generate", parents=[common],
                   help="generate the per-topic document pools")

    p_run = sub.add_parser("run", parents=[common], help="produce a TREC run file")
    p_run.add_argument("--method", choices=("bm25", "rm3", "grm"), required=True)

    p_eval = sub.add_parser("eval", parents=[common],
                            help="evaluate run files against qrels")
    p_eval.add_argument("runs", nargs="+", help="run files to evaluate")
    p_eval.add_argument("--qrels", default="", help="qrels file (overrides config)")
    p_eval.add_argument("--baseline", default="",
                        help="baseline run for paired significance marks")

    p_tune = sub.add_parser("tune", parents=[common], help="cross-validated grid search")
    p_tune.add_argument("--method", choices=("bm25", "rm3"), required=True)
    p_tune.add_argument("--grid", default="", help="grid file (overrides config)")

    sub.add_parser("variance", parents=[common],
                   help="per-generated-document effectiveness table")
    return parser


_COMMANDS = {
    "index": cmd_index,
    "generate": cmd_generate,
    "run": cmd_run,
    "eval": cmd_eval,
    "tune": cmd_tune,
    "variance": cmd_variance,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name, fallback in (("config", ""), ("output", ""), ("threads", 0)):
        if not hasattr(args, name):
            setattr(args, name, fallback)
    try:
        config = load_config(args.config) if args.config else Config()
        if args.threads:
            config.threads = args.threads
        return _COMMANDS[args.command](config, args)
    except GrmError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
