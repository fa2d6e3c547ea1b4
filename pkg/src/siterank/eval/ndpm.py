"""Normalized distance-based performance measure for website rankings.

For every unordered pair of websites in the reference judgment:

* reference strict, system reversed   -> contradiction (counts 1)
* reference strict, system tied       -> compatible, not predicted (counts 1/2)
* reference strict, system agrees     -> counts 0
* reference tied                      -> not scored

``score = (c_minus + 0.5 * c_u) / c_i`` where ``c_i`` is the number of
reference pairs with a strict preference. 0 is total agreement, 1 means
every reference preference is contradicted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence


class NdpmUndefinedError(ValueError):
    pass


@dataclass
class PreferenceJudgment:
    """Reference ordering of websites for one query item; equal ranks are ties."""

    item_id: str
    reference_order: list[tuple[str, int]]
    criterion: str = "quantity"
    description: str = ""
    category: str = ""
    price: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.reference_order = [(str(w), int(r)) for w, r in self.reference_order]
        if len(self.reference_order) < 2:
            raise ValueError(f"judgment {self.item_id!r} needs at least two websites")
        if any(r < 1 for _, r in self.reference_order):
            raise ValueError(f"judgment {self.item_id!r}: ranks must be positive integers")

    @property
    def ranks(self) -> dict[str, int]:
        return dict(self.reference_order)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["reference_order"] = [{"website": w, "rank": r} for w, r in self.reference_order]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PreferenceJudgment":
        order = [(e["website"], e["rank"]) if isinstance(e, dict) else tuple(e)
                 for e in d["reference_order"]]
        return cls(str(d["item_id"]), order, d.get("criterion", "quantity"),
                   d.get("description", ""), d.get("category", ""), d.get("price"),
                   d.get("meta", {}))


def save_judgments(judgments: Iterable[PreferenceJudgment], path: str | Path) -> None:
    data = [j.to_dict() for j in judgments]
    Path(path).write_text(json.dumps(data, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")


def load_judgments(path: str | Path) -> list[PreferenceJudgment]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise ValueError(f"{path}: expected a JSON list of judgments")
    return [PreferenceJudgment.from_dict(d) for d in data]


def ranks_from_scores(entries: Sequence[tuple[str, float]]) -> dict[str, int]:
    """Dense ranks from an ordered (website, score) list; equal neighbouring scores tie."""
    ranks, rank, prev = {}, 0, object()
    for website, score in entries:
        if score != prev:
            rank += 1
            prev = score
        ranks[website] = rank
    return ranks


def system_ranks(system) -> dict[str, int]:
    """Normalize a system ranking into ``{website: rank}``.

    Accepts a ``Ranking`` / ``VoteRanking`` (anything with ``entries``), a
    dict of ranks, a list of (website, score) pairs, or a plain list of
    websites (strict order). Websites flagged ``no_data`` tie after the
    ranked ones.
    """
    if isinstance(system, dict):
        return {str(k): int(v) for k, v in system.items()}
    entries = getattr(system, "entries", system)
    entries = list(entries)
    if entries and isinstance(entries[0], str):
        ranks = {w: i + 1 for i, w in enumerate(entries)}
    else:
        ranks = ranks_from_scores(entries)
    no_data = getattr(system, "no_data", None) or []
    last = max(ranks.values(), default=0) + 1
    for w in no_data:
        ranks.setdefault(w, last)
    return ranks


@dataclass
class NdpmResult:
    c_minus: int
    c_u: int
    c_i: int

    @property
    def score(self) -> float:
        return (self.c_minus + 0.5 * self.c_u) / self.c_i


def ndpm(system, reference: PreferenceJudgment | Sequence[tuple[str, int]] | dict) -> NdpmResult:
    """Score ``system`` against a reference ordering.

    Only websites present in the reference are compared; reference websites
    the system does not rank are treated as tied below everything it ranks.
    """
    if isinstance(reference, PreferenceJudgment):
        ref = reference.ranks
    elif isinstance(reference, dict):
        ref = dict(reference)
    else:
        ref = dict(reference)
    sys_ranks = system_ranks(system)
    bottom = max(sys_ranks.values(), default=0) + 1
    s = {w: sys_ranks.get(w, bottom) for w in ref}

    c_minus = c_u = c_i = 0
    for a, b in combinations(sorted(ref), 2):
        r = ref[a] - ref[b]
        if r == 0:
            continue
        c_i += 1
        d = s[a] - s[b]
        if d == 0:
            c_u += 1
        elif (d > 0) != (r > 0):
            c_minus += 1
    if c_i == 0:
        raise NdpmUndefinedError("undefined NDPM: reference has no strict preference pair")
    return NdpmResult(c_minus, c_u, c_i)


def dense_ranks(values: dict[str, float], descending: bool = True) -> list[tuple[str, int]]:
    """Reference order from per-website values: equal values share a rank."""
    ordered = sorted(values.items(), key=lambda kv: ((-kv[1] if descending else kv[1]), kv[0]))
    out, rank, prev = [], 0, object()
    for w, v in ordered:
        if v != prev:
            rank += 1
            prev = v
        out.append((w, rank))
    return out
