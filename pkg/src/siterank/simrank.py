"""Rank websites by the quantity or average price of similar posts.

Similarity is the cosine between topic vectors; only posts in the query's
category are compared.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from siterank.store import StoreCatalog
from siterank.textprep import tokenize
from siterank.topicmodel.space import TopicSpace

CRITERIA = ("quantity", "average_price")
DIRECTIONS = ("descending", "ascending")


class RankingError(ValueError):
    pass


class NoSimilarItemsError(RankingError):
    pass


def cosine(a: Sequence[float], b: Sequence[float]) -> float:
    """Cosine of the angle between two vectors; 0 if either is all-zero."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise RankingError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    value = float(np.dot(a, b) / (na * nb))
    return min(max(value, 0.0), 1.0) if (a >= 0).all() and (b >= 0).all() else value


def cosine_many(query: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Vectorized ``cosine(query, row)`` for every row."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.size == 0:
        return np.zeros(len(rows))
    qn = np.linalg.norm(query)
    rn = np.linalg.norm(rows, axis=1)
    denom = qn * rn
    out = np.divide(rows @ query, denom, out=np.zeros(len(rows)), where=denom > 0)
    return np.clip(out, 0.0, 1.0)


def iqr_mean(prices: Sequence[float]) -> float:
    """Mean of the prices lying between the first and third quartile (inclusive).

    Quartiles use linear interpolation between order statistics at position
    ``(n - 1) * p``. Fewer than four prices give the plain mean.
    """
    x = np.sort(np.asarray(prices, dtype=np.float64))
    if x.size == 0:
        raise NoSimilarItemsError("no similar items: cannot average an empty price list")
    if x.size < 4:
        return float(x.mean())
    q1, q3 = np.quantile(x, [0.25, 0.75], method="linear")
    mid = x[(x >= q1) & (x <= q3)]
    return float(mid.mean())


@dataclass
class SimilarityQuery:
    description_topics: np.ndarray
    category: str
    criterion: str = "quantity"
    similarity_threshold: float = 0.5
    price_direction: str = "descending"

    def __post_init__(self):
        self.description_topics = np.asarray(self.description_topics, dtype=np.float64)
        if not 0.0 <= self.similarity_threshold <= 1.0:
            raise RankingError(f"similarity threshold must be in [0, 1], got {self.similarity_threshold}")
        if self.criterion not in CRITERIA:
            raise RankingError(f"criterion must be one of {CRITERIA}, got {self.criterion!r}")
        if self.price_direction not in DIRECTIONS:
            raise RankingError(f"price direction must be one of {DIRECTIONS}")


@dataclass
class Ranking:
    entries: list[tuple[str, float]]
    criterion: str
    no_data: list[str] = field(default_factory=list)

    @property
    def websites(self) -> list[str]:
        return [w for w, _ in self.entries]

    def to_dict(self) -> dict:
        out = {"criterion": self.criterion,
               "entries": [{"website": w, "score": s} for w, s in self.entries]}
        if self.no_data:
            out["no_data"] = list(self.no_data)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    def table(self) -> str:
        width = max([len("website")] + [len(w) for w, _ in self.entries])
        lines = [f"{'rank':>4}  {'website':<{width}}  {self.criterion}"]
        for i, (w, s) in enumerate(self.entries, 1):
            score = f"{s:.0f}" if float(s).is_integer() else f"{s:.2f}"
            lines.append(f"{i:>4}  {w:<{width}}  {score}")
        for w in self.no_data:
            lines.append(f"{'-':>4}  {w:<{width}}  no data")
        return "\n".join(lines)


def sort_scores(scores: dict[str, float], descending: bool = True) -> list[tuple[str, float]]:
    """Order by score (descending unless told otherwise), ties by website label ascending."""
    sign = -1.0 if descending else 1.0
    return sorted(scores.items(), key=lambda kv: (sign * kv[1], kv[0]))


class TopicCache:
    """Topic vectors of stored documents, keyed by doc id.

    Filled once per (store, space) pair; a change of space fingerprint drops
    every cached vector. Per website+category blocks are memoized on top.
    """

    def __init__(self, space: TopicSpace | None = None):
        self.fingerprint = space.fingerprint() if space is not None else None
        self.vectors: dict[int, np.ndarray] = {}
        self._blocks: dict[tuple[str, str], tuple] = {}

    def _check(self, space: TopicSpace):
        fp = space.fingerprint()
        if fp != self.fingerprint:
            self.fingerprint = fp
            self.vectors = {}
            self._blocks = {}

    def ensure(self, store: StoreCatalog, space: TopicSpace, doc_ids: Sequence[int] | None = None):
        self._check(space)
        ids = [d.doc_id for d in store] if doc_ids is None else list(doc_ids)
        missing = [i for i in ids if i not in self.vectors]
        if missing:
            tokens = [tokenize(store.get(i).description) for i in missing]
            for doc_id, vec in zip(missing, space.encode(tokens)):
                self.vectors[doc_id] = vec
        return self

    def matrix(self, doc_ids: Sequence[int], dim: int) -> np.ndarray:
        if not doc_ids:
            return np.zeros((0, dim))
        return np.vstack([self.vectors[i] for i in doc_ids])

    def block(self, store: StoreCatalog, space: TopicSpace, website: str, category: str):
        """(doc_ids, prices, vectors) of one website's posts in one category."""
        self._check(space)
        idx = store.index(website)
        key = (website, category)
        hit = self._blocks.get(key)
        if hit is not None and hit[0] == len(idx):
            return hit[1]
        docs = [d for d in idx.docs.values() if d.category == category]
        ids = [d.doc_id for d in docs]
        self.ensure(store, space, ids)
        value = (ids, np.array([d.price for d in docs], dtype=np.float64),
                 self.matrix(ids, space.dim))
        self._blocks[key] = (len(idx), value)
        return value


@dataclass
class SimilarItem:
    doc_id: int
    similarity: float
    price: float


def similar_items(store: StoreCatalog, space: TopicSpace, query: SimilarityQuery,
                  cache: TopicCache | None = None) -> dict[str, list[SimilarItem]]:
    """Same-category posts of every website whose cosine with the query meets the threshold."""
    if query.description_topics.shape != (space.dim,):
        raise RankingError(
            f"query vector has shape {query.description_topics.shape}, space dim is {space.dim}")
    cache = cache if cache is not None else TopicCache()
    out: dict[str, list[SimilarItem]] = {}
    for website in store.websites:
        ids, prices, vectors = cache.block(store, space, website, query.category)
        sims = cosine_many(query.description_topics, vectors)
        # rounding can leave cosine(v, v) a hair below 1
        keep = np.flatnonzero(sims >= query.similarity_threshold - 1e-12)
        out[website] = [SimilarItem(ids[i], float(sims[i]), float(prices[i])) for i in keep]
    return out


def rank_by_criterion(store: StoreCatalog, space: TopicSpace, query: SimilarityQuery,
                      cache: TopicCache | None = None) -> Ranking:
    """Websites ordered by how many similar posts they carry, or by those posts' IQR mean price.

    For the quantity criterion websites without similar posts are listed last
    with score 0. For the price criterion they are left out of the entries
    and reported under ``no_data``.
    """
    found = similar_items(store, space, query, cache)
    if query.criterion == "quantity":
        return Ranking(sort_scores({w: float(len(items)) for w, items in found.items()}),
                       "quantity")
    scores = {w: iqr_mean([it.price for it in items]) for w, items in found.items() if items}
    no_data = sorted(w for w, items in found.items() if not items)
    entries = sort_scores(scores, descending=query.price_direction == "descending")
    return Ranking(entries, "average_price", no_data)


def make_query(space: TopicSpace, description: str, category: str, **kwargs) -> SimilarityQuery:
    return SimilarityQuery(space.encode_one(tokenize(description)), category, **kwargs)



def save_cache(cache: TopicCache, path) -> None:
    ids = np.array(sorted(cache.vectors), dtype=np.int64)
    dim = len(next(iter(cache.vectors.values()))) if cache.vectors else 0
    vectors = np.vstack([cache.vectors[i] for i in ids]) if ids.size else np.zeros((0, dim))
    with open(path, "wb") as fh:
        np.savez(fh, doc_ids=ids, vectors=vectors, fingerprint=np.array(cache.fingerprint or ""))


def load_cache(path) -> TopicCache:
    with np.load(path, allow_pickle=False) as data:
        cache = TopicCache()
        cache.fingerprint = str(data["fingerprint"]) or None
        cache.vectors = {int(i): v for i, v in zip(data["doc_ids"], data["vectors"])}
    return cache
