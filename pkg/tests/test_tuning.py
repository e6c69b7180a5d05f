import random

import pytest

from grm.analysis import analyze
from grm.errors import ConfigError, FormatError
from grm.evaluation import evaluate_run, recall_at_k
from grm.index import Bm25Params, bm25_search
from grm.tuning import (
    BM25_GRID,
    GRM_GRID,
    K_RASE_GRID,
    RM3_GRID,
    FoldSpec,
    Grid,
    cross_validate,
    parse_grid_value,
    read_folds,
    read_grid,
)


def bm25_producer(index, topics_by_qid, depth=1000):
    def produce(point, qids):
        params = Bm25Params(k1=float(point["k1"]), b=float(point["b"]))
        run = {}
        for qid in qids:
            tokens = analyze(topics_by_qid[qid].text, index.analyzer)
            run[qid] = [h.docid for h in bm25_search(tokens, index, params, depth)]
        return run
    return produce


@pytest.fixture(scope="module")
def five_folds(mini_topics):
    qids = [t.qid for t in mini_topics]
    return FoldSpec({f"f{i}": qids[2 * i: 2 * i + 2] for i in range(5)})


THREE_POINTS = Grid({"k1": [0.5, 0.9, 2.1], "b": [0.4]})


# ---------------------------------------------------------------------------
# grids and folds
# ---------------------------------------------------------------------------


def test_grid_enumeration_order():
    grid = Grid({"a": [1, 2], "b": ["x", "y"]})
    assert list(grid.points()) == [
        {"a": 1, "b": "x"}, {"a": 1, "b": "y"},
        {"a": 2, "b": "x"}, {"a": 2, "b": "y"},
    ]
    assert grid.size() == 4


def test_grid_rejects_empty():
    with pytest.raises(ConfigError):
        Grid({})
    with pytest.raises(ConfigError):
        Grid({"a": []})


def test_standard_grids_shape():
    assert BM25_GRID["k1"][0] == 0.1
    assert BM25_GRID["k1"][-1] == 4.9
    assert len(BM25_GRID["k1"]) == 25
    assert BM25_GRID["b"] == [round(0.1 * i, 10) for i in range(1, 11)]
    assert RM3_GRID["fb_terms"] == list(range(5, 96, 5))
    assert RM3_GRID["fb_docs"] == list(range(5, 51, 5))
    assert GRM_GRID["fb_docs"] == [5, 15, 25, 35, 45, 55, 65, 75, 85, 95]
    assert GRM_GRID["fb_terms"] == [5, 15, 25, 35, 45]
    assert K_RASE_GRID["k_rase"] == list(range(10, 101, 10))
    for grid in (BM25_GRID, RM3_GRID, GRM_GRID):
        if "original_query_weight" in grid:
            assert grid["original_query_weight"] == [
                round(0.1 * i, 10) for i in range(1, 10)
            ]


def test_parse_grid_value_ranges_and_lists():
    assert parse_grid_value("0.1:5.0:0.2")[-1] == 4.9  # 5.0 is never landed on
    assert parse_grid_value("0.1:1.0:0.1")[-1] == 1.0  # exact endpoint included
    assert parse_grid_value("5,10,15") == [5, 10, 15]
    assert parse_grid_value("0.25, 0.5") == [0.25, 0.5]
    assert parse_grid_value("1:3:1") == [1, 2, 3]
    with pytest.raises(ConfigError):
        parse_grid_value("1:2")
    with pytest.raises(ConfigError):
        parse_grid_value("3:1:1")
    with pytest.raises(ConfigError):
        parse_grid_value("1:3:0")


def test_read_grid_file(tmp_path):
    path = tmp_path / "grid.cfg"
    path.write_text("# bm25 sweep\nk1 = 0.1:0.5:0.2\nb = 0.4,0.8\n")
    grid = read_grid(str(path))
    assert grid.params == {"k1": [0.1, 0.3, 0.5], "b": [0.4, 0.8]}
    path.write_text("just words\n")
    with pytest.raises(FormatError):
        read_grid(str(path))


def test_folds_validation(tmp_path):
    with pytest.raises(ConfigError, match="more than one"):
        FoldSpec({"a": ["q1"], "b": ["q1"]})
    with pytest.raises(ConfigError, match="empty"):
        FoldSpec({"a": []})
    path = tmp_path / "folds.json"
    path.write_text('{"f0": ["q1", "q2"], "f1": ["q3"]}')
    folds = read_folds(str(path))
    assert folds.all_qids() == ["q1", "q2", "q3"]
    path.write_text("[1, 2]")
    with pytest.raises(FormatError):
        read_folds(str(path))


# ---------------------------------------------------------------------------
# cross_validate
# ---------------------------------------------------------------------------


def test_single_point_grid_equals_plain_evaluation(
    mini_index, mini_topics, mini_qrels, five_folds
):
    topics_by_qid = {t.qid: t for t in mini_topics}
    producer = bm25_producer(mini_index, topics_by_qid)
    grid = Grid({"k1": [0.9], "b": [0.4]})
    result = cross_validate(producer, grid, five_folds, mini_qrels)
    assert all(o.chosen == {"k1": 0.9, "b": 0.4} for o in result.per_fold)
    plain = evaluate_run(
        producer({"k1": 0.9, "b": 0.4}, five_folds.all_qids()), mini_qrels
    )
    assert result.aggregate.per_query == plain.per_query


def test_dominant_point_chosen_for_every_fold(mini_qrels):
    # synthetic producer: point "good" retrieves every relevant document,
    # point "bad" retrieves none
    def produce(point, qids):
        if point["mode"] == "good":
            return {q: sorted(d for d, g in mini_qrels[q].items() if g >= 1)
                    for q in qids}
        return {q: ["nothing"] for q in qids}

    folds = FoldSpec({"f0": ["t01", "t02"], "f1": ["t03", "t04"]})
    grid = Grid({"mode": ["bad", "good"]})
    result = cross_validate(produce, grid, folds, mini_qrels)
    assert all(o.chosen == {"mode": "good"} for o in result.per_fold)
    assert result.aggregate.mean("recall_1000") == 1.0


def test_matches_exhaustive_enumeration_oracle(
    mini_index, mini_topics, mini_qrels, five_folds
):
    topics_by_qid = {t.qid: t for t in mini_topics}
    producer = bm25_producer(mini_index, topics_by_qid)
    result = cross_validate(producer, THREE_POINTS, five_folds, mini_qrels)

    # oracle: for every (fold, point), recompute mean training recall from
    # scratch and pick the first maximizer in enumeration order
    points = list(THREE_POINTS.points())
    runs = {i: producer(p, five_folds.all_qids()) for i, p in enumerate(points)}
    for outcome in result.per_fold:
        held = set(five_folds.folds[outcome.fold_id])
        train = [q for q in five_folds.all_qids() if q not in held]
        best_i, best_mean = None, -1.0
        for i, point in enumerate(points):
            vals = []
            for q in train:
                judged = mini_qrels.get(q)
                if not judged:
                    continue
                r = recall_at_k(runs[i][q], judged)
                if r is not None:
                    vals.append(r)
            mean = sum(vals) / len(vals) if vals else 0.0
            if mean > best_mean:
                best_i, best_mean = i, mean
        assert outcome.chosen == points[best_i]
        assert outcome.train_recall == pytest.approx(best_mean, abs=1e-12)


def test_selection_ignores_held_out_grades(
    mini_index, mini_topics, mini_qrels, five_folds
):
    topics_by_qid = {t.qid: t for t in mini_topics}
    producer = bm25_producer(mini_index, topics_by_qid, depth=100)
    baseline = cross_validate(producer, THREE_POINTS, five_folds, mini_qrels)
    rng = random.Random(71)
    fold_ids = sorted(five_folds.folds)
    for trial in range(10):
        fold_id = fold_ids[trial % len(fold_ids)]
        mutated = {q: dict(j) for q, j in mini_qrels.items()}
        for qid in five_folds.folds[fold_id]:
            docids = list(mutated[qid])
            grades = [mutated[qid][d] for d in docids]
            rng.shuffle(grades)
            mutated[qid] = dict(zip(docids, grades))
        result = cross_validate(producer, THREE_POINTS, five_folds, mutated)
        for before, after in zip(baseline.per_fold, result.per_fold):
            if before.fold_id == fold_id:
                assert after.chosen == before.chosen


def test_failing_grid_point_is_skipped(mini_qrels):
    def produce(point, qids):
        if point["mode"] == "boom":
            raise RuntimeError("pipeline exploded")
        return {q: sorted(d for d, g in mini_qrels[q].items() if g >= 1)
                for q in qids}

    folds = FoldSpec({"f0": ["t01"], "f1": ["t02"]})
    result = cross_validate(produce, Grid({"mode": ["boom", "ok"]}), folds, mini_qrels)
    assert all(o.chosen == {"mode": "ok"} for o in result.per_fold)

    with pytest.raises(ConfigError, match="every grid point failed"):
        cross_validate(produce, Grid({"mode": ["boom"]}), folds, mini_qrels)


def test_cross_validate_is_deterministic(
    mini_index, mini_topics, mini_qrels, five_folds
):
    topics_by_qid = {t.qid: t for t in mini_topics}
    producer = bm25_producer(mini_index, topics_by_qid, depth=50)
    a = cross_validate(producer, THREE_POINTS, five_folds, mini_qrels)
    b = cross_validate(producer, THREE_POINTS, five_folds, mini_qrels)
    assert [o.chosen for o in a.per_fold] == [o.chosen for o in b.per_fold]
    assert a.aggregate.per_query == b.aggregate.per_query
