"""Seeded synthetic marketplace corpus with known ground truth.

Each website has planted category frequencies, per-category subtopic
preferences and per-category price profiles. Every (category, subtopic)
pair owns a disjoint vocabulary group; descriptions mix words from their
group with generic filler words shared by everything, and occasionally
borrow a word from a sibling subtopic of the same category.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from siterank.eval.ndpm import PreferenceJudgment, dense_ranks

DEFAULT_CATEGORIES = ("phone", "car", "motorbike", "camera", "luxury")
DEFAULT_BASE_PRICE = {"phone": 300.0, "car": 20000.0, "motorbike": 1500.0,
                      "camera": 600.0, "luxury": 5000.0}


class SyntheticSpecError(ValueError):
    pass


@dataclass
class SyntheticSpec:
    websites: list[str]
    categories: list[str]
    docs_per_website: int
    # planted_topics[c][t] is the vocabulary group of subtopic t of category c
    planted_topics: list[list[list[str]]]
    generic_words: list[str]
    category_weights: list[list[float]]         # website x category
    topic_weights: list[list[list[float]]]      # website x category x subtopic
    price_profiles: list[list[list[float]]]     # website x category x (mean, spread)
    doc_length: tuple[int, int] = (6, 12)
    generic_fraction: float = 0.25
    crosstalk: float = 0.1
    n_queries: int = 200
    affinity_cutoff: float = 0.01
    seed: int = 0

    @property
    def n_websites(self) -> int:
        return len(self.websites)

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    @property
    def n_topics(self) -> int:
        return sum(len(groups) for groups in self.planted_topics)

    def validate(self) -> None:
        W, C = self.n_websites, self.n_categories
        if W < 1 or C < 1:
            raise SyntheticSpecError("need at least one website and one category")
        if len(set(self.websites)) != W or len(set(self.categories)) != C:
            raise SyntheticSpecError("website and category names must be unique")
        if self.docs_per_website < 0 or self.n_queries < 0:
            raise SyntheticSpecError("document and query counts must be >= 0")
        if len(self.planted_topics) != C or any(not groups for groups in self.planted_topics):
            raise SyntheticSpecError("every category needs at least one planted topic group")
        seen = set(self.generic_words)
        for groups in self.planted_topics:
            for group in groups:
                if not group:
                    raise SyntheticSpecError("planted vocabulary groups must be non-empty")
                if seen.intersection(group) or len(set(group)) != len(group):
                    raise SyntheticSpecError("planted vocabulary groups must be pairwise disjoint")
                seen.update(group)
        if np.shape(self.category_weights) != (W, C):
            raise SyntheticSpecError(f"category_weights must be {W} x {C}")
        for w in range(W):
            if not np.isclose(sum(self.category_weights[w]), 1.0) or min(self.category_weights[w]) < 0:
                raise SyntheticSpecError(f"category weights of {self.websites[w]} must be a distribution")
            for c in range(C):
                tw = self.topic_weights[w][c]
                if len(tw) != len(self.planted_topics[c]) or not np.isclose(sum(tw), 1.0) or min(tw) < 0:
                    raise SyntheticSpecError("topic_weights must be distributions over each category's topics")
                mean, spread = self.price_profiles[w][c]
                if mean < 0 or spread < 0:
                    raise SyntheticSpecError("price profiles need mean >= 0 and spread >= 0")
        lo, hi = self.doc_length
        if not 1 <= lo <= hi:
            raise SyntheticSpecError("doc_length must satisfy 1 <= min <= max")
        if not 0.0 <= self.generic_fraction < 1.0:
            raise SyntheticSpecError("generic_fraction must be in [0, 1)")
        if not 0.0 <= self.crosstalk < 1.0:
            raise SyntheticSpecError("crosstalk must be in [0, 1)")
        if self.generic_fraction > 0 and not self.generic_words:
            raise SyntheticSpecError("generic_fraction > 0 needs generic words")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        d = dict(d)
        if "doc_length" in d:
            d["doc_length"] = tuple(d["doc_length"])
        return cls(**d)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SyntheticSpec":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except (TypeError, json.JSONDecodeError) as exc:
            raise SyntheticSpecError(f"{path}: invalid synthetic spec ({exc})") from None


def default_spec(seed: int = 0, n_websites: int = 7, docs_per_website: int = 700,
                 categories=DEFAULT_CATEGORIES, n_subtopics: int = 2, words_per_topic: int = 12,
                 n_generic: int = 20, n_general: int = 3, n_queries: int = 200) -> SyntheticSpec:
    """A marketplace shaped like a mix of general and specialized sites.

    The first ``n_general`` websites spread over all categories; each of the
    others puts most of its posts into one category. Subtopic preferences
    and price levels are drawn from ``seed``.
    """
    rng = np.random.default_rng(seed)
    categories = list(categories)
    C = len(categories)
    websites = [f"site{chr(ord('a') + i)}" if i < 26 else f"site{i}" for i in range(n_websites)]
    planted = [[[f"{cat}{t}w{j}" for j in range(words_per_topic)] for t in range(n_subtopics)]
               for cat in categories]
    generic = [f"g{j}" for j in range(n_generic)]

    cat_w, top_w, prices = [], [], []
    for w in range(n_websites):
        if w < n_general:
            cw = rng.dirichlet(np.full(C, 3.0))
        else:
            focus = (w - n_general) % C if C == 1 else 1 + (w - n_general) % (C - 1)
            cw = np.full(C, 0.15 / max(C - 1, 1))
            cw[focus] = 0.85 if C > 1 else 1.0
        cat_w.append([float(x) for x in cw / cw.sum()])
        top_w.append([[float(x) for x in rng.dirichlet(np.ones(n_subtopics))] for _ in range(C)])
        row = []
        for cat in categories:
            mean = DEFAULT_BASE_PRICE.get(cat, 1000.0) * float(rng.uniform(0.6, 1.8))
            row.append([round(mean, 2), round(0.08 * mean, 2)])
        prices.append(row)
    return SyntheticSpec(websites, categories, docs_per_website, planted, generic,
                         cat_w, top_w, prices, n_queries=n_queries, seed=seed)


@dataclass
class GroundTruth:
    websites: list[str]
    categories: list[str]
    counts: list[list[list[int]]]        # realized posts per website x category x subtopic
    category_counts: list[list[int]]     # realized posts per website x category
    price_means: list[list[float]]       # planted
    price_spreads: list[list[float]]
    category_weights: list[list[float]]
    topic_weights: list[list[list[float]]]

    def to_dict(self) -> dict:
        return asdict(self)

    def count(self, website: str, category: str, topic: int | None = None) -> int:
        w, c = self.websites.index(website), self.categories.index(category)
        return self.category_counts[w][c] if topic is None else self.counts[w][c][topic]


@dataclass
class SyntheticCorpus:
    records: list[dict]
    queries: list[dict]
    truth: GroundTruth
    judgments: list[PreferenceJudgment] = field(default_factory=list)

    def jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)


def _draw_doc(rng, spec: SyntheticSpec, w: int) -> tuple[int, int, str, float]:
    c = int(rng.choice(spec.n_categories, p=spec.category_weights[w]))
    t = int(rng.choice(len(spec.planted_topics[c]), p=spec.topic_weights[w][c]))
    groups = spec.planted_topics[c]
    length = int(rng.integers(spec.doc_length[0], spec.doc_length[1] + 1))
    words = []
    for _ in range(length):
        u = rng.random()
        if spec.generic_words and u < spec.generic_fraction:
            words.append(spec.generic_words[int(rng.integers(len(spec.generic_words)))])
            continue
        g = t
        # crosstalk borrows a word from a sibling subtopic of the same category
        if len(groups) > 1 and rng.random() < spec.crosstalk:
            g = int(rng.choice([i for i in range(len(groups)) if i != t]))
        group = groups[g]
        zipf = 1.0 / np.arange(1, len(group) + 1) ** 0.8
        words.append(group[int(rng.choice(len(group), p=zipf / zipf.sum()))])
    mean, spread = spec.price_profiles[w][c]
    price = round(max(0.01, float(rng.normal(mean, spread))), 2)
    return c, t, " ".join(words), price


def _normal_pdf(x, mean, spread):
    if spread <= 0:
        return 1.0 if x == mean else 0.0
    z = (x - mean) / spread
    return math.exp(-0.5 * z * z) / (spread * math.sqrt(2 * math.pi))


def generate_synthetic(spec: SyntheticSpec) -> SyntheticCorpus:
    """Generate posts, held-out query items, ground truth and reference judgments.

    Post records follow the ingestion JSONL schema plus a ``topic`` field
    naming the planted subtopic (ignored on ingestion).
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    W, C = spec.n_websites, spec.n_categories
    n_sub = [len(g) for g in spec.planted_topics]
    counts = [[[0] * n_sub[c] for c in range(C)] for _ in range(W)]

    records = []
    for w in range(W):
        for _ in range(spec.docs_per_website):
            c, t, text, price = _draw_doc(rng, spec, w)
            counts[w][c][t] += 1
            records.append({"website": spec.websites[w], "description": text,
                            "category": spec.categories[c], "price": price,
                            "topic": f"{spec.categories[c]}/{t}"})

    truth = GroundTruth(list(spec.websites), list(spec.categories), counts,
                        [[sum(counts[w][c]) for c in range(C)] for w in range(W)],
                        [[spec.price_profiles[w][c][0] for c in range(C)] for w in range(W)],
                        [[spec.price_profiles[w][c][1] for c in range(C)] for w in range(W)],
                        [list(x) for x in spec.category_weights],
                        [[list(t) for t in x] for x in spec.topic_weights])

    queries = []
    if records:
        for q in range(spec.n_queries):
            w = int(rng.integers(W))
            c, t, text, price = _draw_doc(rng, spec, w)
            queries.append({"item_id": f"q{q:04d}", "description": text,
                            "category": spec.categories[c], "price": price,
                            "topic": t, "source": spec.websites[w]})
    corpus = SyntheticCorpus(records, queries, truth)
    corpus.judgments = derive_judgments(spec, corpus)
    return corpus


def derive_judgments(spec: SyntheticSpec, corpus: SyntheticCorpus) -> list[PreferenceJudgment]:
    """Reference orderings per query, one per criterion.

    * quantity: websites by realized post count in the query's category+subtopic
    * average_price: websites carrying that subtopic, by planted mean price (descending)
    * votes: websites by the generator's likelihood of posting this exact item;
      websites below ``affinity_cutoff`` x the best are tied last
    """
    truth = corpus.truth
    out = []
    for q in corpus.queries:
        c = spec.categories.index(q["category"])
        t = q["topic"]
        base = dict(description=q["description"], category=q["category"], price=q["price"],
                    meta={"topic": t, "source": q["source"]})

        qty = {w: truth.counts[i][c][t] for i, w in enumerate(spec.websites)}
        if len(qty) >= 2:
            out.append(PreferenceJudgment(q["item_id"], dense_ranks(qty), "quantity", **base))

        price = {w: truth.price_means[i][c] for i, w in enumerate(spec.websites)
                 if truth.counts[i][c][t] > 0}
        if len(price) >= 2:
            out.append(PreferenceJudgment(q["item_id"], dense_ranks(price), "average_price", **base))

        aff = {}
        for i, w in enumerate(spec.websites):
            mean, spread = spec.price_profiles[i][c]
            aff[w] = (spec.category_weights[i][c] * spec.topic_weights[i][c][t]
                      * _normal_pdf(q["price"], mean, spread))
        top = max(aff.values())
        if top > 0:
            aff = {w: (a if a >= spec.affinity_cutoff * top else 0.0) for w, a in aff.items()}
        if len(aff) >= 2:
            out.append(PreferenceJudgment(q["item_id"], dense_ranks(aff), "votes", **base))
    return out


def write_corpus(corpus: SyntheticCorpus, out_dir: str | Path) -> dict[str, Path]:
    """Write corpus.jsonl, queries.jsonl, ground_truth.json and judgments.json."""
    from siterank.eval.ndpm import save_judgments

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"corpus": out / "corpus.jsonl", "queries": out / "queries.jsonl",
             "ground_truth": out / "ground_truth.json", "judgments": out / "judgments.json"}
    paths["corpus"].write_text(corpus.jsonl(), encoding="utf-8")
    paths["queries"].write_text("".join(json.dumps(q, sort_keys=True) + "\n" for q in corpus.queries),
                                encoding="utf-8")
    paths["ground_truth"].write_text(json.dumps(corpus.truth.to_dict(), indent=1) + "\n",
                                     encoding="utf-8")
    save_judgments(corpus.judgments, paths["judgments"])
    return paths
