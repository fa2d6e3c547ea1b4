"""Latent Dirichlet allocation fitted by collapsed Gibbs sampling.

Works on raw term counts (token-id lists), not tf-idf weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numba
import numpy as np

from siterank.topicmodel.nmf import TopicDistribution, TopicModelError


@dataclass
class LdaModel:
    beta: np.ndarray          # k x n_terms, rows sum to 1
    theta: np.ndarray         # n_docs x k, rows sum to 1
    alpha: float
    eta: float
    assignments: np.ndarray   # flat topic labels, aligned with doc_ptr
    doc_ptr: np.ndarray
    seed: int | None = None
    terms: list[str] | None = None

    @property
    def k(self) -> int:
        return self.beta.shape[0]

    @property
    def n_terms(self) -> int:
        return self.beta.shape[1]


@numba.njit(cache=True)
def _sweep(doc_ptr, words, z, ndk, nkw, nk, alpha, eta, v_eta, u):
    K = nk.shape[0]
    cum = np.empty(K)
    for d in range(doc_ptr.shape[0] - 1):
        for i in range(doc_ptr[d], doc_ptr[d + 1]):
            w = words[i]
            t = z[i]
            ndk[d, t] -= 1
            nkw[t, w] -= 1
            nk[t] -= 1
            total = 0.0
            for j in range(K):
                total += (ndk[d, j] + alpha) * (nkw[j, w] + eta) / (nk[j] + v_eta)
                cum[j] = total
            r = u[i] * total
            t = 0
            while t < K - 1 and cum[t] <= r:
                t += 1
            z[i] = t
            ndk[d, t] += 1
            nkw[t, w] += 1
            nk[t] += 1


@numba.njit(cache=True)
def _fold_in_sweeps(words, beta, alpha, z, u, burn_in):
    K = beta.shape[0]
    n = words.shape[0]
    counts = np.zeros(K)
    for i in range(n):
        counts[z[i]] += 1
    acc = np.zeros(K)
    cum = np.empty(K)
    for s in range(u.shape[0]):
        for i in range(n):
            w = words[i]
            counts[z[i]] -= 1
            total = 0.0
            for j in range(K):
                total += (counts[j] + alpha) * beta[j, w]
                cum[j] = total
            r = u[s, i] * total
            t = 0
            while t < K - 1 and cum[t] <= r:
                t += 1
            z[i] = t
            counts[t] += 1
        if s >= burn_in:
            acc += counts
    return acc


def _flatten(corpus: Sequence[Sequence[int]], vocab_size: int):
    lengths = np.array([len(doc) for doc in corpus], dtype=np.int64)
    doc_ptr = np.zeros(len(corpus) + 1, dtype=np.int64)
    doc_ptr[1:] = np.cumsum(lengths)
    words = (np.concatenate([np.asarray(doc, dtype=np.int64) for doc in corpus])
             if doc_ptr[-1] else np.zeros(0, dtype=np.int64))
    if words.size and (words.min() < 0 or words.max() >= vocab_size):
        raise TopicModelError("token ids must lie in [0, vocab_size)")
    return doc_ptr, words


def lda_train(corpus: Sequence[Sequence[int]], vocab_size: int, k: int,
              alpha: float | None = None, eta: float = 0.01, n_sweeps: int = 200,
              burn_in: int = 100, seed: int = 0, terms: list[str] | None = None,
              callback: Callable | None = None) -> LdaModel:
    """Fit LDA on token-id lists by collapsed Gibbs sampling.

    Args:
        corpus: one list of term ids per document.
        alpha: symmetric document-topic prior; defaults to ``50 / k``.
        eta: symmetric topic-word prior.
        n_sweeps: total sweeps over all tokens; counts from sweeps after
            ``burn_in`` are averaged into the estimates.
        callback: optional ``f(sweep, z, ndk, nkw)`` called after every sweep.

    Returns:
        LdaModel with ``theta[d] ∝ count(d, z) + alpha`` and
        ``beta[z] ∝ count(z, t) + eta`` (averaged post-burn-in counts).
    """
    if k < 1:
        raise TopicModelError(f"topic count must be >= 1, got {k}")
    if len(corpus) == 0:
        raise TopicModelError("corpus is empty")
    if alpha is None:
        alpha = 50.0 / k
    if not alpha > 0 or not eta > 0:
        raise TopicModelError(f"alpha and eta must be > 0, got alpha={alpha}, eta={eta}")
    if vocab_size < 1:
        raise TopicModelError("vocab_size must be >= 1")
    if not 0 <= burn_in < n_sweeps:
        raise TopicModelError(f"need 0 <= burn_in < n_sweeps, got {burn_in}, {n_sweeps}")

    doc_ptr, words = _flatten(corpus, vocab_size)
    D, N = len(corpus), words.size
    rng = np.random.default_rng(seed)
    z = rng.integers(0, k, size=N).astype(np.int64)
    ndk = np.zeros((D, k), dtype=np.int64)
    nkw = np.zeros((k, vocab_size), dtype=np.int64)
    doc_of = np.repeat(np.arange(D), np.diff(doc_ptr))
    np.add.at(ndk, (doc_of, z), 1)
    np.add.at(nkw, (z, words), 1)
    nk = nkw.sum(axis=1)

    acc_dk = np.zeros((D, k))
    acc_kw = np.zeros((k, vocab_size))
    for s in range(n_sweeps):
        u = rng.random(N)
        _sweep(doc_ptr, words, z, ndk, nkw, nk, float(alpha), float(eta),
               float(vocab_size * eta), u)
        if callback is not None:
            callback(s, z, ndk, nkw)
        if s >= burn_in:
            acc_dk += ndk
            acc_kw += nkw

    n_kept = n_sweeps - burn_in
    theta = acc_dk / n_kept + alpha
    theta /= theta.sum(axis=1, keepdims=True)
    beta = acc_kw / n_kept + eta
    beta /= beta.sum(axis=1, keepdims=True)
    return LdaModel(beta, theta, float(alpha), float(eta), z, doc_ptr, seed, terms)


def lda_fold_in(model: LdaModel, tokens: Sequence[int], n_sweeps: int = 50,
                seed: int = 0) -> TopicDistribution:
    """Topic distribution for an unseen document by Gibbs sampling with beta frozen.

    Out-of-vocabulary ids are dropped; an empty document gives the uniform
    distribution. The first half of the sweeps is discarded as burn-in.
    """
    if n_sweeps < 1:
        raise TopicModelError("n_sweeps must be >= 1")
    words = np.array([t for t in tokens if 0 <= t < model.n_terms], dtype=np.int64)
    k = model.k
    if words.size == 0:
        return TopicDistribution(np.full(k, 1.0 / k))
    rng = np.random.default_rng(seed)
    z = rng.integers(0, k, size=words.size).astype(np.int64)
    u = rng.random((n_sweeps, words.size))
    burn_in = n_sweeps // 2
    acc = _fold_in_sweeps(words, model.beta, model.alpha, z, u, burn_in)
    theta = acc / (n_sweeps - burn_in) + model.alpha
    return TopicDistribution(theta / theta.sum())
