"""Grid search with k-fold cross-validation, optimizing Recall@1000.

Each fold's parameters are chosen purely from the other folds' queries
(first grid point in enumeration order wins ties), then evaluated on the
held-out fold; the aggregate report concatenates the held-out results.
Grid points are enumerated in declaration order of the parameters, which
makes selection deterministic and reproducible.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .errors import ConfigError, FormatError
from .evaluation import MetricReport, Qrels, recall_at_k

log = logging.getLogger(__name__)

# Tuning grids. BM25's k1 runs 0.1..5.0 in steps of 0.2, which never reaches
# the 5.0 endpoint; the grid therefore stops at 4.9.
BM25_GRID = {
    "k1": [round(0.1 + 0.2 * i, 10) for i in range(25)],  # 0.1 .. 4.9
    "b": [round(0.1 * i, 10) for i in range(1, 11)],  # 0.1 .. 1.0
}
RM3_GRID = {
    "fb_terms": list(range(5, 96, 5)),
    "fb_docs": list(range(5, 51, 5)),
    "original_query_weight": [round(0.1 * i, 10) for i in range(1, 10)],
}
GRM_GRID = {
    "fb_docs": list(range(5, 96, 10)),
    "fb_terms": list(range(5, 46, 10)),
    "original_query_weight": [round(0.1 * i, 10) for i in range(1, 10)],
}
K_RASE_GRID = {"k_rase": list(range(10, 101, 10))}

GridPoint = dict[str, object]

# A run producer maps (grid point, qids) to {qid: ranked docids}.
RunProducer = Callable[[GridPoint, Sequence[str]], Mapping[str, Sequence[str]]]


@dataclass(frozen=True)
class Grid:
    """Named parameters with ordered candidate values."""

    params: dict[str, list]

    def __post_init__(self) -> None:
        if not self.params or any(not values for values in self.params.values()):
            raise ConfigError("grid must have at least one candidate per parameter")

    def points(self) -> Iterable[GridPoint]:
        names = list(self.params)
        for combo in itertools.product(*(self.params[n] for n in names)):
            yield dict(zip(names, combo))

    def size(self) -> int:
        n = 1
        for values in self.params.values():
            n *= len(values)
        return n


@dataclass(frozen=True)
class FoldSpec:
    """fold id -> list of qids; folds must be disjoint and non-empty."""

    folds: dict[str, list[str]]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        if not self.folds:
            raise ConfigError("folds: at least one fold required")
        for fold_id, qids in self.folds.items():
            if not qids:
                raise ConfigError(f"folds: fold {fold_id!r} is empty")
            for qid in qids:
                if qid in seen:
                    raise ConfigError(f"folds: qid {qid!r} appears in more than one fold")
                seen.add(qid)

    def all_qids(self) -> list[str]:
        return sorted(q for qids in self.folds.values() for q in qids)


def read_folds(path: str) -> FoldSpec:
    """Read a folds file: a JSON object mapping fold id -> array of qids."""
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise FormatError(f"{path}: expected an object mapping fold id to qid list")
    return FoldSpec({str(k): [str(q) for q in v] for k, v in data.items()})


def parse_grid_value(text: str) -> list:
    """Parse one grid line value: "a:b:step" range syntax or a comma list.

    Range endpoints are inclusive when landed on exactly (within 1e-9);
    values are kept as int when every candidate is integral.
    """
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid range must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ConfigError(f"grid range step must be > 0 in {text!r}")
        values = []
        i = 0
        while True:
            v = round(start + i * step, 10)
            if v > stop + 1e-9:
                break
            values.append(v)
            i += 1
        if not values:
            raise ConfigError(f"grid range {text!r} is empty")
    else:
        values = [float(p) for p in text.split(",") if p.strip()]
        if not values:
            raise ConfigError(f"grid list {text!r} is empty")
    if all(float(v).is_integer() for v in values):
        return [int(v) for v in values]
    return values


def read_grid(path: str) -> Grid:
    """Read a plain-text grid file of "name = values" lines ('#' comments)."""
    params: dict[str, list] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError(f"{path}:{lineno}: expected 'name = values'")
            name, _, value = line.partition("=")
            params[name.strip()] = parse_grid_value(value)
    return Grid(params)


@dataclass
class FoldOutcome:
    fold_id: str
    chosen: GridPoint
    train_recall: float
    test_report: MetricReport


@dataclass
class TuneResult:
    per_fold: list[FoldOutcome]
    aggregate: MetricReport


def _per_query_recall(
    run: Mapping[str, Sequence[str]], qrels: Qrels
) -> dict[str, float]:
    out = {}
    for qid, ranking in run.items():
        judged = qrels.get(qid)
        if not judged:
            continue
        r = recall_at_k(ranking, judged)
        if r is not None:
            out[qid] = r
    return out


def cross_validate(
    producer: RunProducer,
    grid: Grid,
    folds: FoldSpec,
    qrels: Qrels,
    tag: str = "tuned",
) -> TuneResult:
    """Select per-fold parameters on training folds, evaluate held out.

    Every grid point is run once over all fold qids and cached; selection for
    a fold then reads only training-fold queries, so held-out relevance data
    cannot influence the choice.  Grid points whose producer raises are
    skipped with a warning and excluded from selection.
    """
    from .evaluation import evaluate_run

    points = list(grid.points())
    if not points:
        raise ConfigError("empty tuning grid")
    all_qids = folds.all_qids()

    runs: list[tuple[GridPoint, Mapping[str, Sequence[str]], dict[str, float]]] = []
    for point in points:
        try:
            run = producer(point, all_qids)
        except Exception as exc:  # noqa: BLE001 - a bad point must not kill the sweep
            log.warning("grid point %s failed and is excluded: %s", point, exc)
            continue
        runs.append((point, run, _per_query_recall(run, qrels)))
    if not runs:
        raise ConfigError("every grid point failed; nothing to select")

    per_fold: list[FoldOutcome] = []
    combined = MetricReport(tag=tag)
    for fold_id in sorted(folds.folds):
        held_out = set(folds.folds[fold_id])
        train = [q for q in all_qids if q not in held_out]
        best: tuple[GridPoint, Mapping[str, Sequence[str]], float] | None = None
        for point, run, recall_by_qid in runs:
            scores = [recall_by_qid[q] for q in train if q in recall_by_qid]
            mean = sum(scores) / len(scores) if scores else 0.0
            if best is None or mean > best[2]:
                best = (point, run, mean)
        assert best is not None
        point, run, train_recall = best
        test_run = {q: run[q] for q in sorted(held_out) if q in run}
        test_report = evaluate_run(test_run, qrels, tag=tag)
        per_fold.append(FoldOutcome(fold_id, point, train_recall, test_report))
        combined.per_query.update(test_report.per_query)
    return TuneResult(per_fold=per_fold, aggregate=combined)
