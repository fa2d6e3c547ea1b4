import csv
import io
import itertools
import json
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from siterank.eval.ndpm import (NdpmUndefinedError, PreferenceJudgment, dense_ranks,
                                load_judgments, ndpm, ranks_from_scores, save_judgments)
from siterank.eval.plots import plot_objective, plot_sweep
from siterank.eval.sweep import (CSV_HEADER, SweepRow, evaluate_similarity, rows_table,
                                 rows_to_csv, sweep_topics, sweep_trees, write_csv)
from siterank.eval.synth import (SyntheticSpec, SyntheticSpecError, default_spec,
                                 generate_synthetic, write_corpus)
from siterank.simrank import Ranking, SimilarityQuery, TopicCache, rank_by_criterion
from siterank.store import StoreCatalog
from siterank.textprep import tokenize
from siterank.topicmodel.space import fit_space


def strict(*sites):
    return [(w, i + 1) for i, w in enumerate(sites)]


# ---------------------------------------------------------------- NDPM

def test_ndpm_examples():
    ref = strict("A", "B", "C")
    assert ndpm(["A", "B", "C"], ref).score == 0.0
    assert ndpm(["C", "B", "A"], ref).score == 1.0
    r = ndpm(["A", "C", "B"], ref)
    assert (r.c_i, r.c_minus, r.c_u) == (3, 1, 0)
    assert r.score == pytest.approx(1 / 3)


def test_ndpm_ties():
    ref = strict("A", "B", "C")
    # system ties everything: every strict pair is "not predicted"
    assert ndpm({"A": 1, "B": 1, "C": 1}, ref).score == 0.5
    # reference ties are not scored
    r = ndpm(["C", "B", "A"], [("A", 1), ("B", 1), ("C", 2)])
    assert (r.c_i, r.c_minus, r.c_u) == (2, 2, 0)
    with pytest.raises(NdpmUndefinedError):
        ndpm(["A", "B"], [("A", 1), ("B", 1)])


def test_ndpm_accepts_rankings_and_missing_sites():
    ref = PreferenceJudgment("q", strict("A", "B", "C", "D"))
    ranking = Ranking([("B", 5.0), ("A", 3.0), ("C", 3.0)], "quantity")
    r = ndpm(ranking, ref)
    # A<B reversed; A=C tied; D missing -> tied at the bottom, below everyone (agrees)
    assert (r.c_minus, r.c_u, r.c_i) == (1, 1, 6)
    price = Ranking([("C", 10.0)], "average_price", no_data=["A", "B"])
    r = ndpm(price, strict("A", "B", "C"))
    assert (r.c_minus, r.c_u) == (2, 1)


def test_ranks_from_scores_and_dense_ranks():
    assert ranks_from_scores([("a", 5), ("b", 5), ("c", 1)]) == {"a": 1, "b": 1, "c": 2}
    assert dense_ranks({"x": 3, "y": 7, "z": 3}) == [("y", 1), ("x", 2), ("z", 2)]
    assert dense_ranks({"x": 3, "y": 7}, descending=False) == [("x", 1), ("y", 2)]


def random_ranks(rng, sites, tie_prob):
    ranks, r = {}, 0
    for w in rng.sample(sites, len(sites)):
        if r == 0 or rng.random() >= tie_prob:
            r += 1
        ranks[w] = r
    return ranks


def test_ndpm_bounds_10k_pairs():
    rng = random.Random(0)
    sites = list("ABCDEFG")
    done = 0
    while done < 10_000:
        n = rng.randint(2, 7)
        ref = random_ranks(rng, sites[:n], 0.3)
        if len(set(ref.values())) < 2:
            continue
        sys_ = random_ranks(rng, sites[:n], 0.3)
        r = ndpm(sys_, ref)
        assert 0.0 <= r.score <= 1.0
        assert r.score == (r.c_minus + 0.5 * r.c_u) / r.c_i
        done += 1


def test_random_baseline_half():
    rng = random.Random(1)
    sites = list("ABCDEFG")
    ref = strict(*sites)
    scores = [ndpm(rng.sample(sites, 7), ref).score for _ in range(1000)]
    assert abs(np.mean(scores) - 0.5) <= 0.05


@settings(max_examples=200)
@given(st.permutations(list("ABCDEF")), st.permutations(list("ABCDEF")))
def test_reversal_duality(ref_order, sys_order):
    ref = strict(*ref_order)
    a = ndpm(list(sys_order), ref).score
    b = ndpm(list(reversed(sys_order)), ref).score
    assert a + b == pytest.approx(1.0)


def test_judgment_round_trip(tmp_path):
    js = [PreferenceJudgment("q1", strict("A", "B"), "quantity", "red phone", "phone", 10.0,
                             {"topic": 1}),
          PreferenceJudgment("q2", [("A", 1), ("B", 1), ("C", 2)], "votes")]
    save_judgments(js, tmp_path / "j.json")
    assert load_judgments(tmp_path / "j.json") == js
    with pytest.raises(ValueError):
        PreferenceJudgment("bad", [("A", 1)])
    with pytest.raises(ValueError):
        PreferenceJudgment("bad", [("A", 0), ("B", 1)])


# ---------------------------------------------------------- synthetic

def test_synth_empty_and_deterministic():
    spec = default_spec(seed=3, docs_per_website=0)
    c = generate_synthetic(spec)
    assert c.records == [] and c.queries == [] and c.judgments == []
    assert all(n == 0 for row in c.truth.category_counts for n in row)
    a = generate_synthetic(default_spec(seed=5, docs_per_website=40, n_queries=10))
    b = generate_synthetic(default_spec(seed=5, docs_per_website=40, n_queries=10))
    assert a.jsonl() == b.jsonl()
    assert [j.to_dict() for j in a.judgments] == [j.to_dict() for j in b.judgments]
    assert generate_synthetic(default_spec(seed=6, docs_per_website=40)).jsonl() != a.jsonl()


def test_synth_five_to_one_ratio():
    spec = default_spec(seed=0, n_websites=2, docs_per_website=500, n_general=2, n_queries=0)
    spec.category_weights = [[1.0, 0, 0, 0, 0], [0.2, 0.2, 0.2, 0.2, 0.2]]
    truth = generate_synthetic(spec).truth
    a, b = truth.category_counts[0][0], truth.category_counts[1][0]
    assert a == 500
    assert 3.5 <= a / b <= 6.5


def test_synth_records_ingest_cleanly(tmp_path):
    corpus = generate_synthetic(default_spec(seed=1, docs_per_website=30, n_queries=12))
    paths = write_corpus(corpus, tmp_path)
    store = StoreCatalog()
    report = store.ingest_file(paths["corpus"])
    assert report.accepted == 7 * 30 and report.rejected == 0
    assert len(load_judgments(paths["judgments"])) == len(corpus.judgments)
    truth = json.loads(paths["ground_truth"].read_text())
    for w, site in enumerate(truth["websites"]):
        for c, cat in enumerate(truth["categories"]):
            assert store.aggregate(site, cat) == truth["category_counts"][w][c]


def test_synth_judgments_follow_truth():
    spec = default_spec(seed=2, docs_per_website=60, n_queries=30)
    corpus = generate_synthetic(spec)
    truth = corpus.truth
    for j in corpus.judgments:
        c = truth.categories.index(j.category)
        t = j.meta["topic"]
        ranks = j.ranks
        if j.criterion == "quantity":
            counts = {w: truth.counts[i][c][t] for i, w in enumerate(truth.websites)}
            for a, b in itertools.combinations(ranks, 2):
                assert (counts[a] > counts[b]) == (ranks[a] < ranks[b])
        elif j.criterion == "average_price":
            assert all(truth.counts[truth.websites.index(w)][c][t] > 0 for w in ranks)


def test_spec_validation_and_round_trip(tmp_path):
    spec = default_spec(seed=0, docs_per_website=10)
    spec.save(tmp_path / "spec.json")
    assert SyntheticSpec.load(tmp_path / "spec.json") == spec
    spec.planted_topics[1][0] = list(spec.planted_topics[0][0])
    with pytest.raises(SyntheticSpecError, match="disjoint"):
        spec.validate()
    bad = default_spec(seed=0)
    bad.category_weights[0] = [1.0, 1.0, 0, 0, 0]
    with pytest.raises(SyntheticSpecError):
        generate_synthetic(bad)


# -------------------------------------------------------------- sweeps

@pytest.fixture(scope="module")
def small_market():
    corpus = generate_synthetic(default_spec(seed=4, docs_per_website=80, n_queries=25))
    store = StoreCatalog()
    store.ingest([json.dumps(r) for r in corpus.records])
    return store, corpus


def test_sweep_perfect_when_judgments_are_system_output(small_market):
    store, corpus = small_market
    space = fit_space([tokenize(d.description) for d in store.documents()], "nmf", 6, seed=0)
    cache = TopicCache(space)
    mirrored = []
    for j in (j for j in corpus.judgments if j.criterion == "quantity"):
        q = SimilarityQuery(space.encode_one(tokenize(j.description)), j.category, "quantity")
        r = rank_by_criterion(store, space, q, cache)
        mirrored.append(PreferenceJudgment(j.item_id, list(ranks_from_scores(r.entries).items()),
                                           "quantity", j.description, j.category))
    res = evaluate_similarity(store, space, mirrored, "quantity", cache=cache)
    assert res.mean_ndpm == 0.0 or res.n_queries == 0
    assert res.n_queries + res.n_skipped == len(mirrored)


def test_sweep_topics_shape(small_market):
    store, corpus = small_market
    rows = sweep_topics(store, "nmf", [4, 10], corpus.judgments, seed=0, max_iters=60)
    assert [(r.param, r.criterion) for r in rows] == [
        (4, "quantity"), (4, "average_price"), (10, "quantity"), (10, "average_price")]
    for r in rows:
        assert 0.0 <= r.mean_ndpm <= 1.0 and r.n_queries > 0
    bow = sweep_topics(store, "bow", [20], corpus.judgments, criteria=["quantity"])
    assert len(bow) == 1


def test_sweep_trees_deterministic(small_market):
    store, corpus = small_market
    space = fit_space([tokenize(d.description) for d in store.documents()], "nmf", 6, seed=0)
    a = sweep_trees(store, space, [1, 3], corpus.judgments, seed=2)
    b = sweep_trees(store, space, [1], corpus.judgments, seed=2)
    assert len(a) == 2 and [r.param for r in a] == [1, 3]
    assert a[0].mean_ndpm == b[0].mean_ndpm


def test_csv_and_table(tmp_path):
    rows = [SweepRow(10, "quantity", 0.123456789, 40, 2), SweepRow(20, "quantity", 0.1, 42, 0)]
    text = rows_to_csv(rows)
    parsed = list(csv.reader(io.StringIO(text)))
    assert tuple(parsed[0]) == CSV_HEADER == ("param", "mean_ndpm", "n_queries", "n_skipped")
    assert parsed[1] == ["10", "0.123457", "40", "2"]
    write_csv(rows, tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text() == text
    assert "0.1235" in rows_table(rows, "title")


def test_plots_written(tmp_path):
    rows = [SweepRow(k, "quantity", 0.3 - 0.01 * k, 10, 0) for k in (5, 10, 20)]
    p = plot_sweep({"NMF": rows}, tmp_path / "fig.png", "topics", "quantity")
    assert p.exists() and p.read_bytes()[:4] == b"\x89PNG"
    q = plot_objective([3.0, 2.0, 1.5], tmp_path / "obj.png")
    assert q.exists() and q.stat().st_size > 0
