"""Random-Forest vote ranking of websites.

Each tree is an entropy decision tree grown on a bootstrap sample, choosing
among ``m`` randomly drawn features at every node. At prediction time every
tree votes for the website of the leaf the item lands in; websites are
ranked by vote count.

Feature layout: ``[topic_0 .. topic_{k-1}, category, price]``. The category
column is categorical (one-vs-rest equality splits), everything else numeric
(threshold splits at midpoints between distinct values).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

FOREST_FORMAT = "siterank-forest"
FOREST_VERSION = 1
MIN_GAIN = 1e-12


class ForestError(ValueError):
    pass


class ForestFormatError(ForestError):
    pass


@dataclass
class FeatureRow:
    topics: np.ndarray
    category: str
    price: float
    label: str | None = None

    def __post_init__(self):
        self.topics = np.asarray(self.topics, dtype=np.float64)


@dataclass(frozen=True)
class FeatureSchema:
    n_topics: int
    categories: tuple[str, ...]
    labels: tuple[str, ...]

    @property
    def n_features(self) -> int:
        return self.n_topics + 2

    @property
    def category_feature(self) -> int:
        return self.n_topics

    @property
    def price_feature(self) -> int:
        return self.n_topics + 1

    @classmethod
    def from_rows(cls, rows: Sequence[FeatureRow]) -> "FeatureSchema":
        if not rows:
            raise ForestError("training set is empty")
        k = rows[0].topics.size
        if any(r.topics.size != k for r in rows):
            raise ForestError("all rows must have the same topic dimension")
        if any(r.label is None for r in rows):
            raise ForestError("training rows need a website label")
        return cls(k, tuple(sorted({r.category for r in rows})), tuple(sorted({r.label for r in rows})))

    def encode(self, rows: Sequence[FeatureRow]) -> np.ndarray:
        """Feature matrix; unseen categories encode as -1 (never equal to a split value)."""
        codes = {c: i for i, c in enumerate(self.categories)}
        X = np.empty((len(rows), self.n_features))
        for i, r in enumerate(rows):
            if r.topics.size != self.n_topics:
                raise ForestError(
                    f"row has {r.topics.size} topic features, forest expects {self.n_topics}")
            X[i, :self.n_topics] = r.topics
            X[i, self.n_topics] = codes.get(r.category, -1)
            X[i, self.n_topics + 1] = r.price
        return X

    def encode_labels(self, rows: Sequence[FeatureRow]) -> np.ndarray:
        codes = {c: i for i, c in enumerate(self.labels)}
        return np.array([codes[r.label] for r in rows], dtype=np.int64)


def default_m(n_features: int) -> int:
    return max(1, math.isqrt(n_features))


# ---------------------------------------------------------------- entropy

def entropy(counts: np.ndarray) -> np.ndarray:
    """Shannon entropy in bits of each row of class counts (last axis)."""
    counts = np.asarray(counts, dtype=np.float64)
    totals = counts.sum(axis=-1, keepdims=True)
    p = np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
    logs = np.log2(p, out=np.zeros_like(p), where=p > 0)
    return -(p * logs).sum(axis=-1)


def information_gain(parent: np.ndarray, left: np.ndarray) -> np.ndarray:
    """Entropy reduction of splitting class counts ``parent`` into ``left`` and the rest."""
    parent = np.asarray(parent, dtype=np.float64)
    left = np.asarray(left, dtype=np.float64)
    right = parent - left
    n = parent.sum()
    nl = left.sum(axis=-1)
    return entropy(parent) - (nl / n) * entropy(left) - ((n - nl) / n) * entropy(right)


@dataclass
class Split:
    gain: float
    feature: int
    threshold: float
    categorical: bool


def best_split(X: np.ndarray, y: np.ndarray, features: Sequence[int], n_classes: int,
               categorical: int | None) -> Split | None:
    """Highest-gain split of rows ``X, y`` over ``features``; ``None`` if no gain is positive.

    Earlier features and lower thresholds win ties.
    """
    n = y.size
    parent = np.bincount(y, minlength=n_classes)
    best = None
    for f in features:
        v = X[:, f]
        if f == categorical:
            values, inv = np.unique(v, return_inverse=True)
            if values.size < 2:
                continue
            left = np.zeros((values.size, n_classes))
            np.add.at(left, (inv, y), 1)
            gains = information_gain(parent, left)
            i = int(np.argmax(gains))
            cand = Split(float(gains[i]), int(f), float(values[i]), True)
        else:
            order = np.argsort(v, kind="stable")
            vs = v[order]
            cut = np.flatnonzero(vs[1:] != vs[:-1])
            if cut.size == 0:
                continue
            onehot = np.zeros((n, n_classes))
            onehot[np.arange(n), y[order]] = 1.0
            left = np.cumsum(onehot, axis=0)[cut]
            gains = information_gain(parent, left)
            i = int(np.argmax(gains))
            lo, hi = vs[cut[i]], vs[cut[i] + 1]
            thr = lo + (hi - lo) / 2.0
            if not lo <= thr < hi:
                thr = lo
            cand = Split(float(gains[i]), int(f), float(thr), False)
        if cand.gain > MIN_GAIN and (best is None or cand.gain > best.gain):
            best = cand
    return best


# ------------------------------------------------------------------ trees

@dataclass
class DecisionTree:
    """Flat node arrays; node 0 is the root and ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    categorical: np.ndarray
    left: np.ndarray
    right: np.ndarray
    label: np.ndarray
    subsets: list[list[int]]

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf node index reached by every row of ``X``."""
        X = np.atleast_2d(X)
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            cur = node[active]
            f = self.feature[cur]
            x = X[active, f]
            thr = self.threshold[cur]
            go_left = np.where(self.categorical[cur], x == thr, x <= thr)
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.label[self.apply(X)]

    def to_dict(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "categorical": self.categorical.astype(int).tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "label": self.label.tolist(), "subsets": self.subsets}

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        return cls(np.array(d["feature"], dtype=np.int64),
                   np.array(d["threshold"], dtype=np.float64),
                   np.array(d["categorical"], dtype=bool),
                   np.array(d["left"], dtype=np.int64),
                   np.array(d["right"], dtype=np.int64),
                   np.array(d["label"], dtype=np.int64),
                   [list(s) for s in d["subsets"]])

    def check(self) -> None:
        """Raise if the node arrays do not form a well-formed binary tree."""
        n = self.n_nodes
        seen = np.zeros(n, dtype=int)
        stack = [0]
        while stack:
            i = stack.pop()
            seen[i] += 1
            if self.feature[i] >= 0:
                for child in (self.left[i], self.right[i]):
                    if not 0 < child < n:
                        raise ForestFormatError(f"node {i} has invalid child {child}")
                    stack.append(int(child))
        if (seen != 1).any():
            raise ForestFormatError("tree nodes are not reachable exactly once from the root")


def majority(counts: np.ndarray) -> int:
    # argmax returns the lowest class index among ties, i.e. the smallest label
    return int(np.argmax(counts))


def train_tree(X: np.ndarray, y: np.ndarray, m: int, seed, n_classes: int | None = None,
               categorical: int | None = None, min_leaf: int = 2,
               max_depth: int | None = None) -> DecisionTree:
    """Grow one unpruned entropy tree.

    At each node ``m`` features are drawn without replacement. A node becomes
    a leaf when it is pure, has fewer than ``min_leaf`` rows, sits at
    ``max_depth``, or none of its drawn features gives a positive gain.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise ForestError("cannot grow a tree on an empty sample")
    n_features = X.shape[1]
    if not 1 <= m <= n_features:
        raise ForestError(f"m must be in [1, {n_features}], got {m}")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    feature, threshold, categ, left, right, label, subsets = [], [], [], [], [], [], []

    def new_node(rows):
        feature.append(-1)
        threshold.append(0.0)
        categ.append(False)
        left.append(-1)
        right.append(-1)
        label.append(majority(np.bincount(y[rows], minlength=n_classes)))
        subsets.append([])
        return len(feature) - 1

    stack = [(new_node(np.arange(y.size)), np.arange(y.size), 0)]
    while stack:
        node, rows, depth = stack.pop()
        ys = y[rows]
        if rows.size < min_leaf or (ys == ys[0]).all():
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        feats = rng.choice(n_features, size=m, replace=False)
        split = best_split(X[rows], ys, feats.tolist(), n_classes, categorical)
        subsets[node] = sorted(int(f) for f in feats)
        if split is None:
            continue
        x = X[rows, split.feature]
        mask = (x == split.threshold) if split.categorical else (x <= split.threshold)
        lrows, rrows = rows[mask], rows[~mask]
        feature[node] = split.feature
        threshold[node] = split.threshold
        categ[node] = split.categorical
        left[node] = new_node(lrows)
        right[node] = new_node(rrows)
        # push right first so the left subtree is numbered first
        stack.append((right[node], rrows, depth + 1))
        stack.append((left[node], lrows, depth + 1))

    return DecisionTree(np.array(feature, dtype=np.int64), np.array(threshold),
                        np.array(categ, dtype=bool), np.array(left, dtype=np.int64),
                        np.array(right, dtype=np.int64), np.array(label, dtype=np.int64),
                        subsets)


# ---------------------------------------------------------------- bagging

@dataclass
class BootstrapSample:
    indices: np.ndarray
    oob: np.ndarray


def bootstrap_sample(n_rows: int | Sequence, seed) -> BootstrapSample:
    """Draw ``n`` row indices uniformly with replacement; the rest are out-of-bag."""
    n = n_rows if isinstance(n_rows, (int, np.integer)) else len(n_rows)
    if n < 1:
        raise ForestError("cannot bootstrap an empty training set")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    idx = rng.integers(0, n, size=n)
    drawn = np.zeros(n, dtype=bool)
    drawn[idx] = True
    return BootstrapSample(idx, np.flatnonzero(~drawn))


def canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row permutation sorting by (label, features); independent of input order."""
    keys = [X[:, j] for j in range(X.shape[1] - 1, -1, -1)] + [y]
    return np.lexsort(keys)


# ----------------------------------------------------------------- forest

@dataclass
class VoteRanking:
    entries: list[tuple[str, int]]

    @property
    def websites(self) -> list[str]:
        return [w for w, _ in self.entries]

    def to_dict(self) -> dict:
        return {"criterion": "votes",
                "entries": [{"website": w, "score": v} for w, v in self.entries]}


def rank_votes(labels: Sequence[str], votes: Sequence[int]) -> VoteRanking:
    """Order labels by votes descending, ties by label ascending."""
    pairs = sorted(zip(labels, (int(v) for v in votes)), key=lambda p: (-p[1], p[0]))
    return VoteRanking(pairs)


@dataclass
class Forest:
    trees: list[DecisionTree]
    schema: FeatureSchema
    m: int
    seed: int
    min_leaf: int = 2
    max_depth: int | None = None
    oob: list[np.ndarray] = field(default_factory=list)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def votes(self, X: np.ndarray) -> np.ndarray:
        """(n_rows, n_labels) vote counts."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.schema.n_features:
            raise ForestError(f"expected {self.schema.n_features} features, got {X.shape[1]}")
        out = np.zeros((X.shape[0], len(self.schema.labels)), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for tree in self.trees:
            np.add.at(out, (rows, tree.predict(X)), 1)
        return out

    def vote_rank(self, row: FeatureRow) -> VoteRanking:
        return vote_rank(self, row)

    def to_dict(self) -> dict:
        return {"format": FOREST_FORMAT, "version": FOREST_VERSION,
                "n_trees": self.n_trees, "m": self.m, "seed": self.seed,
                "min_leaf": self.min_leaf, "max_depth": self.max_depth,
                "n_topics": self.schema.n_topics, "categories": list(self.schema.categories),
                "labels": list(self.schema.labels),
                "trees": [t.to_dict() for t in self.trees],
                "oob": [o.tolist() for o in self.oob]}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, separators=(",", ":"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps() + "\n", encoding="utf-8")

    @classmethod
    def loads(cls, text: str, path="<string>") -> "Forest":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ForestFormatError(f"{path}: not a {FOREST_FORMAT} v{FOREST_VERSION} file ({exc})") from None
        if not isinstance(d, dict) or d.get("format") != FOREST_FORMAT:
            raise ForestFormatError(f"{path}: not a {FOREST_FORMAT} file")
        if d.get("version") != FOREST_VERSION:
            raise ForestFormatError(f"{path}: {FOREST_FORMAT} version {d.get('version')} unsupported "
                                    f"(expected {FOREST_VERSION})")
        try:
            trees = [DecisionTree.from_dict(t) for t in d["trees"]]
            schema = FeatureSchema(int(d["n_topics"]), tuple(d["categories"]), tuple(d["labels"]))
            forest = cls(trees, schema, int(d["m"]), int(d["seed"]), int(d["min_leaf"]),
                         d["max_depth"], [np.array(o, dtype=np.int64) for o in d.get("oob", [])])
        except (KeyError, TypeError, ValueError) as exc:
            raise ForestFormatError(f"{path}: malformed {FOREST_FORMAT} v{FOREST_VERSION} ({exc})") from None
        if len(trees) != d["n_trees"]:
            raise ForestFormatError(f"{path}: header says {d['n_trees']} trees, found {len(trees)}")
        for t in trees:
            t.check()
        return forest

    @classmethod
    def load(cls, path: str | Path) -> "Forest":
        return cls.loads(Path(path).read_text(encoding="utf-8"), path)


def train_forest(rows: Sequence[FeatureRow], n_trees: int = 100, m: int | None = None,
                 seed: int = 0, min_leaf: int = 2, max_depth: int | None = None) -> Forest:
    """Train ``n_trees`` trees, each on its own seeded bootstrap sample.

    Rows are put into a canonical order before sampling, so the forest
    depends on the multiset of rows and the seed, not on input order.
    """
    if n_trees < 1:
        raise ForestError(f"n_trees must be >= 1, got {n_trees}")
    schema = FeatureSchema.from_rows(rows)
    X = schema.encode(rows)
    y = schema.encode_labels(rows)
    order = canonical_order(X, y)
    X, y = X[order], y[order]
    if m is None:
        m = default_m(schema.n_features)

    trees, oob = [], []
    for child in np.random.SeedSequence(seed).spawn(n_trees):
        rng = np.random.default_rng(child)
        sample = bootstrap_sample(y.size, rng)
        trees.append(train_tree(X[sample.indices], y[sample.indices], m, rng,
                                n_classes=len(schema.labels), categorical=schema.category_feature,
                                min_leaf=min_leaf, max_depth=max_depth))
        oob.append(sample.oob)
    return Forest(trees, schema, m, seed, min_leaf, max_depth, oob)


def vote_rank(forest: Forest, row: FeatureRow) -> VoteRanking:
    """Every tree votes for its leaf's website; zero-vote websites trail with 0."""
    X = forest.schema.encode([row])
    return rank_votes(forest.schema.labels, forest.votes(X)[0])
