"""Experiment harness: mean NDPM over held-out judgments, swept over a parameter."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from siterank.eval.ndpm import NdpmUndefinedError, PreferenceJudgment, ndpm
from siterank.simrank import SimilarityQuery, TopicCache, rank_by_criterion
from siterank.store import StoreCatalog
from siterank.textprep import tokenize
from siterank.topicmodel.space import TopicSpace, fit_space
from siterank.voterank import FeatureRow, Forest, rank_votes, train_forest

CSV_HEADER = ("param", "mean_ndpm", "n_queries", "n_skipped")


@dataclass
class EvalResult:
    mean_ndpm: float
    n_queries: int
    n_skipped: int
    scores: list[float] = field(default_factory=list)


@dataclass
class SweepRow:
    param: int
    criterion: str
    mean_ndpm: float
    n_queries: int
    n_skipped: int


def _mean(scores: list[float], skipped: int) -> EvalResult:
    # scores come from a fixed judgment order, so the mean is order-stable
    mean = float(np.mean(scores)) if scores else float("nan")
    return EvalResult(mean, len(scores), skipped, scores)


def evaluate_similarity(store: StoreCatalog, space: TopicSpace,
                        judgments: Sequence[PreferenceJudgment], criterion: str = "quantity",
                        threshold: float = 0.5, price_direction: str = "descending",
                        cache: TopicCache | None = None) -> EvalResult:
    """Mean NDPM of similarity ranking over the judgments of one criterion."""
    cache = cache if cache is not None else TopicCache()
    selected = [j for j in judgments if j.criterion == criterion]
    vectors = space.encode([tokenize(j.description) for j in selected]) if selected else []
    scores, skipped = [], 0
    for j, vec in zip(selected, vectors):
        query = SimilarityQuery(vec, j.category, criterion, threshold, price_direction)
        ranking = rank_by_criterion(store, space, query, cache)
        try:
            scores.append(ndpm(ranking, j).score)
        except NdpmUndefinedError:
            skipped += 1
    return _mean(scores, skipped)


def feature_rows(store: StoreCatalog, space: TopicSpace,
                 cache: TopicCache | None = None) -> list[FeatureRow]:
    """Training rows from every stored post: topic vector, category, posted price, website."""
    cache = cache if cache is not None else TopicCache()
    docs = store.documents()
    cache.ensure(store, space, [d.doc_id for d in docs])
    return [FeatureRow(cache.vectors[d.doc_id], d.category, d.price, d.website) for d in docs]


def evaluate_votes(forest: Forest, space: TopicSpace,
                   judgments: Sequence[PreferenceJudgment]) -> EvalResult:
    selected = [j for j in judgments if j.criterion == "votes"]
    if not selected:
        return _mean([], 0)
    vectors = space.encode([tokenize(j.description) for j in selected])
    rows = [FeatureRow(v, j.category, float(j.price)) for j, v in zip(selected, vectors)]
    votes = forest.votes(forest.schema.encode(rows))
    scores, skipped = [], 0
    for j, v in zip(selected, votes):
        try:
            scores.append(ndpm(rank_votes(forest.schema.labels, v), j).score)
        except NdpmUndefinedError:
            skipped += 1
    return _mean(scores, skipped)


def sweep_topics(store: StoreCatalog, model_kind: str, topic_counts: Sequence[int],
                 judgments: Sequence[PreferenceJudgment],
                 criteria: Sequence[str] = ("quantity", "average_price"),
                 threshold: float = 0.5, price_direction: str = "descending",
                 seed: int = 0, stopwords=(), min_doc_freq: int = 2, **model_kwargs) -> list[SweepRow]:
    """Train one space per topic count and score similarity ranking for each criterion.

    For ``bow`` the swept value is the number of retained features.
    """
    corpus = [tokenize(d.description) for d in store.documents()]
    rows = []
    for k in topic_counts:
        space = fit_space(corpus, model_kind, int(k), stopwords, min_doc_freq, seed, **model_kwargs)
        cache = TopicCache(space)
        for crit in criteria:
            res = evaluate_similarity(store, space, judgments, crit, threshold, price_direction, cache)
            rows.append(SweepRow(int(k), crit, res.mean_ndpm, res.n_queries, res.n_skipped))
    return rows


def sweep_trees(store: StoreCatalog, space: TopicSpace, tree_counts: Sequence[int],
                judgments: Sequence[PreferenceJudgment], seed: int = 0, m: int | None = None,
                min_leaf: int = 2, cache: TopicCache | None = None) -> list[SweepRow]:
    """Train a forest per tree count on the store's posts and score vote ranking."""
    rows_in = feature_rows(store, space, cache)
    out = []
    for n in tree_counts:
        forest = train_forest(rows_in, int(n), m, seed, min_leaf)
        res = evaluate_votes(forest, space, judgments)
        out.append(SweepRow(int(n), "votes", res.mean_ndpm, res.n_queries, res.n_skipped))
    return out


def rows_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow([r.param, f"{r.mean_ndpm:.6f}", r.n_queries, r.n_skipped])
    return buf.getvalue()


def write_csv(rows: Sequence[SweepRow], path: str | Path) -> None:
    Path(path).write_text(rows_to_csv(rows), encoding="utf-8")


def rows_table(rows: Sequence[SweepRow], title: str = "") -> str:
    lines = [title] if title else []
    lines.append(f"{'param':>7}  {'criterion':<14} {'mean_ndpm':>9}  {'queries':>7}  {'skipped':>7}")
    for r in rows:
        lines.append(f"{r.param:>7}  {r.criterion:<14} {r.mean_ndpm:>9.4f}  {r.n_queries:>7}  "
                     f"{r.n_skipped:>7}")
    return "\n".join(lines)
