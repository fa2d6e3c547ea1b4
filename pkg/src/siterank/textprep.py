"""Tokenization, vocabulary filtering and tf-idf bag-of-words matrices."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

VOCAB_FORMAT = "siterank-vocab"
VOCAB_VERSION = 1

# letters and digits of any script; underscore counts as punctuation
_TOKEN_RE = re.compile(r"[^\W_]+")


class VocabularyError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercase ``text`` and split it into alphanumeric runs.

    >>> tokenize("Samsung S6 32gb, like-new!")
    ['samsung', 's6', '32gb', 'like', 'new']
    """
    return _TOKEN_RE.findall(text.lower())


def load_stopwords(path: str | Path | None) -> set[str]:
    """Read a stopword file (UTF-8, one token per line). ``None`` gives an empty set."""
    if path is None:
        return set()
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            word = line.strip().lower()
            if word and not word.startswith("#"):
                words.add(word)
    return words


@dataclass
class Vocabulary:
    term_to_id: dict[str, int]
    doc_freq: np.ndarray
    total_docs: int
    terms: list[str] = field(init=False)

    def __post_init__(self):
        self.doc_freq = np.asarray(self.doc_freq, dtype=np.int64)
        terms = [""] * len(self.term_to_id)
        for term, idx in self.term_to_id.items():
            terms[idx] = term
        self.terms = terms

    def __len__(self):
        return len(self.term_to_id)

    def __contains__(self, term):
        return term in self.term_to_id

    def idf(self) -> np.ndarray:
        """Natural-log inverse document frequency ``ln(N / n_t)`` per term id."""
        if len(self) == 0:
            return np.zeros(0)
        return np.log(self.total_docs / self.doc_freq)

    def ids(self, tokens: Iterable[str]) -> list[int]:
        """Map tokens to term ids, dropping out-of-vocabulary tokens."""
        lookup = self.term_to_id
        return [lookup[t] for t in tokens if t in lookup]

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"#{VOCAB_FORMAT}\tv{VOCAB_VERSION}\tN={self.total_docs}\n")
            for idx, term in enumerate(self.terms):
                fh.write(f"{term}\t{idx}\t{int(self.doc_freq[idx])}\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n").split("\t")
            if (len(header) != 3 or header[0] != f"#{VOCAB_FORMAT}"
                    or header[1] != f"v{VOCAB_VERSION}" or not header[2].startswith("N=")):
                raise VocabularyError(
                    f"{path}: not a {VOCAB_FORMAT} v{VOCAB_VERSION} file (header {header!r})")
            total = int(header[2][2:])
            term_to_id, dfs = {}, []
            for lineno, line in enumerate(fh, start=2):
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 3:
                    raise VocabularyError(f"{path}:{lineno}: expected term<TAB>id<TAB>doc_freq")
                term, idx, df = parts[0], int(parts[1]), int(parts[2])
                if idx != len(dfs):
                    raise VocabularyError(f"{path}:{lineno}: ids must be dense and ordered")
                term_to_id[term] = idx
                dfs.append(df)
        return cls(term_to_id, np.array(dfs, dtype=np.int64), total)


def build_vocabulary(corpus: Sequence[Sequence[str]], stopwords: Iterable[str] = (),
                     min_doc_freq: int = 2) -> Vocabulary:
    """Build a vocabulary, dropping stopwords and terms in fewer than ``min_doc_freq`` docs.

    The default ``min_doc_freq=2`` removes words that appear in only one
    description. Term ids follow sorted term order.
    """
    if len(corpus) == 0:
        raise VocabularyError("cannot build a vocabulary from an empty corpus")
    if min_doc_freq < 1:
        raise VocabularyError(f"min_doc_freq must be >= 1, got {min_doc_freq}")
    stop = set(stopwords)
    df = Counter()
    for doc in corpus:
        df.update(set(doc))
    kept = sorted(t for t, n in df.items() if n >= min_doc_freq and t not in stop)
    return Vocabulary({t: i for i, t in enumerate(kept)},
                      np.array([df[t] for t in kept], dtype=np.int64), len(corpus))


@dataclass
class SparseVector:
    """Sparse term-weight vector with strictly increasing term ids."""

    ids: np.ndarray
    weights: np.ndarray
    dim: int

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.ids.shape != self.weights.shape:
            raise ValueError("ids and weights must have the same length")
        if self.ids.size and (np.any(np.diff(self.ids) <= 0) or self.ids[0] < 0
                              or self.ids[-1] >= self.dim):
            raise ValueError("term ids must be strictly increasing and within dim")

    @property
    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.ids.tolist(), self.weights.tolist()))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.ids] = self.weights
        return out


def count_vector(tokens: Iterable[str], vocab: Vocabulary) -> SparseVector:
    """Raw term counts over ``vocab``; out-of-vocabulary tokens are ignored."""
    counts = Counter(vocab.ids(tokens))
    ids = sorted(counts)
    return SparseVector(ids, [float(counts[i]) for i in ids], len(vocab))


def tfidf_vector(tokens: Iterable[str], vocab: Vocabulary) -> SparseVector:
    """tf-idf weights ``f_{t,d} * ln(N / n_t)`` for the in-vocabulary tokens."""
    counts = Counter(vocab.ids(tokens))
    ids = sorted(counts)
    N = vocab.total_docs
    weights = [counts[i] * math.log(N / vocab.doc_freq[i]) for i in ids]
    return SparseVector(ids, weights, len(vocab))


@dataclass
class TermDocMatrix:
    """Terms x documents matrix stored as one sparse column per document."""

    columns: list[SparseVector]
    n_terms: int

    def __post_init__(self):
        for col in self.columns:
            if col.dim != self.n_terms:
                raise ValueError(f"column dim {col.dim} != n_terms {self.n_terms}")

    @property
    def n_docs(self) -> int:
        return len(self.columns)

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_terms, self.n_docs

    def to_csc(self) -> sp.csc_matrix:
        indptr = np.zeros(self.n_docs + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([c.ids.size for c in self.columns])
        if self.columns:
            indices = np.concatenate([c.ids for c in self.columns])
            data = np.concatenate([c.weights for c in self.columns])
        else:
            indices, data = np.zeros(0, dtype=np.int64), np.zeros(0)
        return sp.csc_matrix((data, indices, indptr), shape=self.shape)

    def to_dense(self) -> np.ndarray:
        return self.to_csc().toarray()


def build_matrix(corpus: Sequence[Sequence[str]], vocab: Vocabulary) -> TermDocMatrix:
    return TermDocMatrix([tfidf_vector(doc, vocab) for doc in corpus], len(vocab))


def build_count_matrix(corpus: Sequence[Sequence[str]], vocab: Vocabulary) -> TermDocMatrix:
    return TermDocMatrix([count_vector(doc, vocab) for doc in corpus], len(vocab))


def select_features(matrix: TermDocMatrix, vocab: Vocabulary,
                    k: int) -> tuple[TermDocMatrix, Vocabulary]:
    """Keep the ``k`` terms with the highest document frequency.

    Ties are broken by lower term id. Retained terms are renumbered densely
    in their original relative order and every column is projected onto them.
    """
    n = len(vocab)
    if not 1 <= k <= n:
        raise VocabularyError(f"k must be in [1, {n}], got {k}")
    # stable sort on -df keeps lower ids first among equal frequencies
    order = np.argsort(-vocab.doc_freq, kind="stable")
    keep = np.sort(order[:k])
    remap = np.full(n, -1, dtype=np.int64)
    remap[keep] = np.arange(k)

    columns = []
    for col in matrix.columns:
        new_ids = remap[col.ids]
        mask = new_ids >= 0
        columns.append(SparseVector(new_ids[mask], col.weights[mask], k))
    reduced = Vocabulary({vocab.terms[i]: j for j, i in enumerate(keep)},
                         vocab.doc_freq[keep], vocab.total_docs)
    return TermDocMatrix(columns, k), reduced
