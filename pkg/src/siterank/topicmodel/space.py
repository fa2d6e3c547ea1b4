"""Map raw token lists into the vector space used for ranking.

A space is either a trained topic model (NMF or LDA) plus its vocabulary,
or the plain tf-idf bag of words restricted to the most frequent terms.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from siterank.textprep import (Vocabulary, build_matrix, build_vocabulary, select_features)
from siterank.topicmodel.io import ModelFormatError, dumps_model, load_model, save_model
from siterank.topicmodel.lda import LdaModel, lda_fold_in, lda_train
from siterank.topicmodel.nmf import NmfModel, nmf_fold_in_batch, nmf_train

KINDS = ("nmf", "lda", "bow")


@dataclass
class TopicSpace:
    kind: str
    vocab: Vocabulary
    model: NmfModel | LdaModel | None = None
    fold_in_iters: int = 300
    fold_in_sweeps: int = 50
    seed: int = 0
    _fingerprint: str | None = field(default=None, init=False, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return len(self.vocab) if self.model is None else self.model.k

    def encode(self, token_lists: Sequence[Sequence[str]]) -> np.ndarray:
        """One L1-normalized row per document.

        Documents with no usable tokens map to the uniform topic distribution
        for topic models and to the zero vector for the bag of words.
        """
        if self.kind == "nmf":
            A = build_matrix(token_lists, self.vocab).to_csc()
            return nmf_fold_in_batch(self.model, A, self.fold_in_iters)
        if self.kind == "lda":
            rows = [lda_fold_in(self.model, self.vocab.ids(toks), self.fold_in_sweeps,
                                self.seed).weights for toks in token_lists]
            return np.array(rows).reshape(len(rows), self.dim)
        X = build_matrix(token_lists, self.vocab).to_csc().T.toarray()
        sums = X.sum(axis=1, keepdims=True)
        return np.divide(X, sums, out=np.zeros_like(X), where=sums > 0)

    def encode_one(self, tokens: Sequence[str]) -> np.ndarray:
        return self.encode([tokens])[0]

    def fingerprint(self) -> str:
        """Content hash of vocabulary, model and fold-in settings (computed once)."""
        if self._fingerprint is None:
            self._fingerprint = self._hash()
        return self._fingerprint

    def _hash(self) -> str:
        h = hashlib.sha256(self.kind.encode())
        h.update("\n".join(self.vocab.terms).encode("utf-8"))
        h.update(self.vocab.doc_freq.tobytes())
        if self.model is not None:
            h.update(dumps_model(self.model))
        h.update(f"{self.fold_in_iters}/{self.fold_in_sweeps}/{self.seed}".encode())
        return h.hexdigest()


def fit_space(corpus: Sequence[Sequence[str]], kind: str, k: int, stopwords=(),
              min_doc_freq: int = 2, seed: int = 0, max_iters: int = 200, tol: float = 1e-4,
              alpha: float | None = None, eta: float = 0.01, n_sweeps: int = 200,
              burn_in: int = 100) -> TopicSpace:
    """Build the vocabulary over ``corpus`` and train a ``kind`` space of size ``k``.

    For ``bow`` the ``k`` most document-frequent terms are kept (all of them
    if ``k`` exceeds the vocabulary).
    """
    if kind not in KINDS:
        raise ValueError(f"unknown space kind {kind!r}; expected one of {KINDS}")
    vocab = build_vocabulary(corpus, stopwords, min_doc_freq)
    if len(vocab) == 0:
        raise ValueError("vocabulary is empty after filtering")
    if kind == "bow":
        matrix = build_matrix(corpus, vocab)
        _, reduced = select_features(matrix, vocab, min(k, len(vocab)))
        return TopicSpace("bow", reduced, seed=seed)
    if kind == "nmf":
        A = build_matrix(corpus, vocab)
        model = nmf_train(A, k, max_iters=max_iters, tol=tol, seed=seed, terms=vocab.terms)
        return TopicSpace("nmf", vocab, model, seed=seed)
    ids = [vocab.ids(doc) for doc in corpus]
    model = lda_train(ids, len(vocab), k, alpha=alpha, eta=eta, n_sweeps=n_sweeps,
                      burn_in=burn_in, seed=seed, terms=vocab.terms)
    return TopicSpace("lda", vocab, model, seed=seed)


SPACE_FILE = "space.json"
VOCAB_FILE = "vocab.tsv"
MODEL_FILE = "model.bin"


def save_space(space: TopicSpace, directory: str | Path) -> None:
    """Write space.json, vocab.tsv and (for topic models) model.bin into ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    space.vocab.save(d / VOCAB_FILE)
    if space.model is not None:
        save_model(space.model, d / MODEL_FILE)
    meta = {"format": "siterank-space", "version": 1, "kind": space.kind,
            "fold_in_iters": space.fold_in_iters, "fold_in_sweeps": space.fold_in_sweeps,
            "seed": space.seed}
    (d / SPACE_FILE).write_text(json.dumps(meta, sort_keys=True) + "\n", encoding="utf-8")


def load_space(directory: str | Path) -> TopicSpace:
    d = Path(directory)
    try:
        meta = json.loads((d / SPACE_FILE).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{d / SPACE_FILE}: corrupt space descriptor ({exc})") from None
    if meta.get("format") != "siterank-space" or meta.get("version") != 1:
        raise ModelFormatError(f"{d / SPACE_FILE}: not a siterank-space v1 descriptor")
    vocab = Vocabulary.load(d / VOCAB_FILE)
    model = load_model(d / MODEL_FILE) if meta["kind"] != "bow" else None
    return TopicSpace(meta["kind"], vocab, model, meta["fold_in_iters"], meta["fold_in_sweeps"],
                      meta["seed"])
