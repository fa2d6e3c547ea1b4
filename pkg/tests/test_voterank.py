import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from siterank.voterank import (DecisionTree, FeatureRow, FeatureSchema, Forest, ForestError,
                               ForestFormatError, best_split, bootstrap_sample, default_m,
                               entropy, information_gain, rank_votes, train_forest, train_tree,
                               vote_rank)


def H(counts):
    n = sum(counts)
    return -sum(c / n * math.log2(c / n) for c in counts if c)


def brute_gain(y, mask):
    n = len(y)
    left, right = y[mask], y[~mask]
    if len(left) == 0 or len(right) == 0:
        return 0.0
    cnt = lambda a: np.bincount(a, minlength=y.max() + 1).tolist()
    return H(cnt(y)) - len(left) / n * H(cnt(left)) - len(right) / n * H(cnt(right))


def test_entropy_values():
    np.testing.assert_allclose(entropy(np.array([[1, 1], [4, 0], [1, 3]])),
                               [1.0, 0.0, H([1, 3])])


def test_bootstrap_examples():
    s = bootstrap_sample(1, 0)
    assert s.indices.tolist() == [0] and s.oob.size == 0
    a, b = bootstrap_sample(50, 7), bootstrap_sample(50, 7)
    assert a.indices.tolist() == b.indices.tolist()
    s = bootstrap_sample(1000, 2024)
    distinct = np.unique(s.indices).size / 1000
    assert 0.58 <= distinct <= 0.68
    assert np.unique(s.indices).size + s.oob.size == 1000
    with pytest.raises(ForestError):
        bootstrap_sample(0, 0)


def test_two_row_split_one_bit():
    X = np.array([[10.0], [100.0]])
    y = np.array([0, 1])
    split = best_split(X, y, [0], 2, None)
    assert split.gain == pytest.approx(1.0)
    assert split.threshold == 55.0
    tree = train_tree(X, y, 1, 0, min_leaf=1)
    assert tree.n_nodes == 3
    assert tree.predict(X).tolist() == [0, 1]


def test_pure_sample_single_leaf():
    tree = train_tree(np.random.default_rng(0).random((6, 3)), np.full(6, 2), 3, 0, n_classes=3)
    assert tree.n_nodes == 1 and tree.label.tolist() == [2]


@pytest.mark.parametrize("seed", range(50))
def test_gain_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    X = np.column_stack([rng.integers(0, 5, 20).astype(float), rng.random(20),
                         rng.integers(0, 3, 20).astype(float)])
    y = rng.integers(0, 3, 20)
    if y.max() < 1:
        y[0] = 1
    split = best_split(X, y, [0, 1, 2], int(y.max()) + 1, categorical=2)
    # best over every candidate split by brute force
    best = 0.0
    for f in range(3):
        for v in np.unique(X[:, f]):
            mask = X[:, f] == v if f == 2 else X[:, f] <= v
            best = max(best, brute_gain(y, mask))
    if split is None:
        assert best <= 1e-12
        return
    assert split.gain >= 0
    assert split.gain == pytest.approx(best, abs=1e-12)
    x = X[:, split.feature]
    mask = x == split.threshold if split.categorical else x <= split.threshold
    assert split.gain == pytest.approx(brute_gain(y, mask), abs=1e-12)


def test_information_gain_vectorized():
    parent = np.array([3, 3])
    left = np.array([[3, 0], [1, 1]])
    np.testing.assert_allclose(information_gain(parent, left),
                               [1.0, brute_gain(np.array([0] * 3 + [1] * 3),
                                                np.array([1, 0, 0, 1, 0, 0], dtype=bool))])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 40))
def test_fully_grown_tree_fits_training_rows(seed, n):
    rng = np.random.default_rng(seed)
    X = np.column_stack([rng.random(n), rng.integers(0, 3, n).astype(float)])
    y = rng.integers(0, 4, n)
    tree = train_tree(X, y, 2, seed, n_classes=4, categorical=1, min_leaf=1)
    tree.check()
    # rows with identical features but different labels cannot be separated
    keys = {}
    for row, label in zip(map(tuple, X), y):
        keys.setdefault(row, set()).add(int(label))
    pred = tree.predict(X)
    for row, label, p in zip(map(tuple, X), y, pred):
        if len(keys[row]) == 1:
            assert p == label


def test_default_m():
    assert default_m(52) == 7
    assert default_m(3) == 1


def stub_tree(label):
    return DecisionTree(np.array([-1]), np.array([0.0]), np.array([False]), np.array([-1]),
                        np.array([-1]), np.array([label]), [[]])


def test_stub_forest_votes():
    schema = FeatureSchema(1, ("phone",), ("A", "B", "C"))
    trees = [stub_tree(0)] * 60 + [stub_tree(1)] * 30 + [stub_tree(2)] * 10
    forest = Forest(trees, schema, 1, 0)
    r = vote_rank(forest, FeatureRow([0.5], "phone", 10.0))
    assert r.entries == [("A", 60), ("B", 30), ("C", 10)]
    unanimous = Forest([stub_tree(1)] * 5, schema, 1, 0)
    assert unanimous.vote_rank(FeatureRow([0.5], "car", 1.0)).entries == [("B", 5), ("A", 0),
                                                                          ("C", 0)]


def test_rank_votes_tie_break():
    assert rank_votes(["c", "a", "b"], [2, 2, 5]).websites == ["b", "a", "c"]


def separable_rows(n_per_site, seed, noise=0.0):
    """Seven websites, each with its own category and price band."""
    rng = np.random.default_rng(seed)
    rows = []
    cats = ["phone", "car", "book", "shoe"]
    for s in range(7):
        for _ in range(n_per_site):
            topics = rng.dirichlet(np.ones(3))
            price = (s % 2) * 1000 + 100 * s + rng.uniform(0, 50)
            if rng.random() < noise:
                price = rng.uniform(0, 2000)
            rows.append(FeatureRow(topics, cats[s % 4], price, f"site{s}"))
    return rows


@pytest.fixture(scope="module")
def separable_forest():
    return train_forest(separable_rows(30, 0), n_trees=100, seed=1)


def test_separable_accuracy(separable_forest):
    test = separable_rows(20, 99)
    X = separable_forest.schema.encode(test)
    votes = separable_forest.votes(X)
    assert (votes.sum(axis=1) == 100).all()
    top = [separable_forest.schema.labels[i] for i in votes.argmax(axis=1)]
    acc = np.mean([t == r.label for t, r in zip(top, test)])
    assert acc >= 0.9


def test_bagging_helps():
    wins = 0
    for seed in range(10):
        train = separable_rows(15, seed, noise=0.3)
        test = separable_rows(15, 100 + seed, noise=0.3)
        truth = [r.label for r in test]
        acc = []
        for n in (1, 100):
            forest = train_forest(train, n_trees=n, seed=seed)
            labels = forest.schema.labels
            top = [labels[i] for i in forest.votes(forest.schema.encode(test)).argmax(axis=1)]
            acc.append(np.mean([a == b for a, b in zip(top, truth)]))
        wins += acc[1] >= acc[0]
    assert wins == 10


def test_one_tree_forest_ranks_its_label_first():
    rows = separable_rows(5, 3)
    forest = train_forest(rows, n_trees=1, seed=0)
    row = rows[0]
    leaf_label = forest.schema.labels[forest.trees[0].predict(forest.schema.encode([row]))[0]]
    assert vote_rank(forest, row).entries[0] == (leaf_label, 1)


def test_seeded_snapshots_byte_identical(tmp_path):
    rows = separable_rows(10, 4)
    a = train_forest(rows, n_trees=15, seed=3)
    b = train_forest(rows, n_trees=15, seed=3)
    a.save(tmp_path / "a.json")
    b.save(tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert train_forest(rows, n_trees=15, seed=4).dumps() != a.dumps()


def test_permutation_invariance():
    rows = separable_rows(10, 5)
    perm = np.random.default_rng(0).permutation(len(rows))
    a = train_forest(rows, n_trees=10, seed=2)
    b = train_forest([rows[i] for i in perm], n_trees=10, seed=2)
    assert a.dumps() == b.dumps()


def test_forest_round_trip(tmp_path, separable_forest):
    path = tmp_path / "forest.json"
    separable_forest.save(path)
    again = Forest.load(path)
    queries = separable_rows(5, 7) + [FeatureRow([0.2, 0.3, 0.5], "unseen", 123.0)]
    for q in queries:
        assert vote_rank(again, q).entries == vote_rank(separable_forest, q).entries
    assert again.dumps() == separable_forest.dumps()


def test_forest_format_errors(tmp_path, separable_forest):
    with pytest.raises(ForestFormatError):
        Forest.loads("{")
    with pytest.raises(ForestFormatError, match="version"):
        Forest.loads('{"format": "siterank-forest", "version": 9}')
    d = separable_forest.to_dict()
    d["trees"][0]["left"][0] = 0
    import json
    with pytest.raises(ForestFormatError):
        Forest.loads(json.dumps(d))


def test_schema_checks():
    with pytest.raises(ForestError):
        train_forest([], n_trees=1)
    with pytest.raises(ForestError):
        train_forest([FeatureRow([1.0], "a", 1.0)], n_trees=1)
    forest = train_forest([FeatureRow([1.0], "a", 1.0, "X"), FeatureRow([0.0], "b", 2.0, "Y")],
                          n_trees=2)
    with pytest.raises(ForestError):
        forest.vote_rank(FeatureRow([1.0, 2.0], "a", 1.0))
