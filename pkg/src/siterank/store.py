"""Embedded document store: one index per website plus an inverted index.

Documents are the source of truth; postings are rebuilt from them on load.
The inverted index records token presence only.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Iterator

from siterank.textprep import tokenize

STORE_FORMAT = "siterank-store"
STORE_VERSION = 1


class StoreError(Exception):
    pass


class UnknownWebsiteError(StoreError, KeyError):
    def __init__(self, website):
        super().__init__(website)
        self.website = website

    def __str__(self):
        return f"unknown website: {self.website!r}"


class StoreFormatError(StoreError):
    pass


class RecordError(ValueError):
    pass


@dataclass(frozen=True)
class Document:
    doc_id: int
    website: str
    description: str
    category: str
    price: float


@dataclass
class WebsiteIndex:
    website: str
    postings: dict[str, list[int]] = field(default_factory=dict)
    docs: dict[int, Document] = field(default_factory=dict)

    def add(self, doc: Document, tokens: Iterable[str]) -> None:
        self.docs[doc.doc_id] = doc
        # doc ids are issued in increasing order, so appending keeps lists sorted
        for term in set(tokens):
            self.postings.setdefault(term, []).append(doc.doc_id)

    def __len__(self):
        return len(self.docs)


@dataclass
class IngestReport:
    accepted: int = 0
    rejected: int = 0
    errors: list[tuple[int, str]] = field(default_factory=list)


def parse_record(obj) -> tuple[str, str, str, float]:
    """Validate one decoded JSON record; returns (website, description, category, price)."""
    if not isinstance(obj, dict):
        raise RecordError("record is not a JSON object")
    out = []
    for key in ("website", "description", "category"):
        value = obj.get(key)
        if not isinstance(value, str) or not value.strip():
            raise RecordError(f"field {key!r} must be a non-empty string")
        out.append(value.strip())
    price = obj.get("price")
    if isinstance(price, bool) or not isinstance(price, (int, float)):
        raise RecordError("field 'price' must be a number")
    if not math.isfinite(price) or price < 0:
        raise RecordError(f"price must be finite and >= 0, got {price}")
    return out[0], out[1], out[2], float(price)


class StoreCatalog:
    """All website indices plus the global doc-id counter.

    Writers (ingest, snapshot) hold an internal lock; concurrent readers are
    fine as long as no writer is active.
    """

    def __init__(self):
        self.indices: dict[str, WebsiteIndex] = {}
        self.websites: list[str] = []
        self._next_id = 0
        self._by_id: dict[int, Document] = {}
        self._lock = threading.RLock()

    def __len__(self):
        return len(self._by_id)

    def __iter__(self) -> Iterator[Document]:
        return iter(self._by_id.values())

    def get(self, doc_id: int) -> Document:
        return self._by_id[doc_id]

    def index(self, website: str) -> WebsiteIndex:
        try:
            return self.indices[website]
        except KeyError:
            raise UnknownWebsiteError(website) from None

    def documents(self, category: str | None = None) -> list[Document]:
        """All documents in doc-id order, optionally restricted to one category."""
        return [d for d in self._by_id.values() if category is None or d.category == category]

    def categories(self) -> list[str]:
        return sorted({d.category for d in self._by_id.values()})

    def add(self, website: str, description: str, category: str, price: float) -> Document:
        with self._lock:
            doc = Document(self._next_id, website, description, category, float(price))
            self._next_id += 1
            self._insert(doc)
            return doc

    def _insert(self, doc: Document) -> None:
        if doc.website not in self.indices:
            self.indices[doc.website] = WebsiteIndex(doc.website)
            self.websites.append(doc.website)
        self.indices[doc.website].add(doc, tokenize(doc.description))
        self._by_id[doc.doc_id] = doc

    def ingest(self, lines: Iterable[str]) -> IngestReport:
        """Ingest JSONL lines; bad lines are counted and reported by line number."""
        report = IngestReport()
        with self._lock:
            for lineno, line in enumerate(lines, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    website, description, category, price = parse_record(obj)
                except (json.JSONDecodeError, RecordError) as exc:
                    report.rejected += 1
                    report.errors.append((lineno, str(exc)))
                    continue
                self.add(website, description, category, price)
                report.accepted += 1
        return report

    def ingest_file(self, path: str | Path) -> IngestReport:
        with open(path, encoding="utf-8") as fh:
            return self.ingest(fh)

    def search(self, website: str, terms: Iterable[str]) -> list[int]:
        """Doc ids of ``website`` whose descriptions contain every term."""
        idx = self.index(website)
        terms = list(dict.fromkeys(terms))
        if not terms:
            return sorted(idx.docs)
        lists = []
        for term in terms:
            posting = idx.postings.get(term)
            if not posting:
                return []
            lists.append(posting)
        lists.sort(key=len)
        result = set(lists[0])
        for posting in lists[1:]:
            result.intersection_update(posting)
            if not result:
                return []
        return sorted(result)

    def aggregate(self, website: str, category: str, field: str = "count"):
        docs = [d for d in self.index(website).docs.values() if d.category == category]
        if field == "count":
            return len(docs)
        if field == "prices":
            return [d.price for d in docs]
        raise ValueError(f"unknown aggregation field {field!r}; expected 'count' or 'prices'")

    def snapshot(self, path: str | Path) -> None:
        """Write a versioned text snapshot: a JSON header line, then one document per line."""
        with self._lock:
            header = {"format": STORE_FORMAT, "version": STORE_VERSION,
                      "n_docs": len(self._by_id), "next_id": self._next_id,
                      "websites": self.websites}
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(json.dumps(header, sort_keys=True) + "\n")
                for doc in self._by_id.values():
                    fh.write(json.dumps(asdict(doc), sort_keys=True, ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "StoreCatalog":
        try:
            return cls._load(path)
        except UnicodeDecodeError as exc:
            raise StoreFormatError(
                f"{path}: not a {STORE_FORMAT} v{STORE_VERSION} snapshot ({exc})") from None

    @classmethod
    def _load(cls, path):
        with open(path, encoding="utf-8") as fh:
            first = fh.readline()
            try:
                header = json.loads(first)
            except json.JSONDecodeError:
                header = None
            if (not isinstance(header, dict) or header.get("format") != STORE_FORMAT
                    or header.get("version") != STORE_VERSION):
                raise StoreFormatError(
                    f"{path}: expected {STORE_FORMAT} version {STORE_VERSION} header")
            store = cls()
            last_id = -1
            for lineno, line in enumerate(fh, start=2):
                try:
                    obj = json.loads(line)
                    website, description, category, price = parse_record(obj)
                    doc = Document(int(obj["doc_id"]), website, description, category, price)
                except (json.JSONDecodeError, RecordError, KeyError, TypeError, ValueError) as exc:
                    raise StoreFormatError(
                        f"{path}:{lineno}: corrupt document line in {STORE_FORMAT} "
                        f"v{STORE_VERSION} snapshot ({exc})") from None
                if doc.doc_id <= last_id:
                    raise StoreFormatError(f"{path}:{lineno}: doc ids must be unique and increasing")
                store._insert(doc)
                last_id = doc.doc_id
        if len(store) != header.get("n_docs"):
            raise StoreFormatError(
                f"{path}: {STORE_FORMAT} v{STORE_VERSION} header declares "
                f"{header.get('n_docs')} documents, found {len(store)} (truncated?)")
        store._next_id = max(int(header.get("next_id", 0)), last_id + 1)
        # keep header order for websites; index creation order may differ
        order = [w for w in header.get("websites", []) if w in store.indices]
        store.websites = order + [w for w in store.websites if w not in order]
        return store
