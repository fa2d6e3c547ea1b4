"""Non-negative matrix factorization by multiplicative updates.

A (terms x docs) ~= W (terms x k) @ H (k x docs), minimizing ||A - WH||_F
subject to W >= 0, H >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from siterank.textprep import SparseVector, TermDocMatrix

EPS = 1e-12


class TopicModelError(ValueError):
    pass


@dataclass
class TopicDistribution:
    weights: np.ndarray
    normalized: bool = True

    def __len__(self):
        return len(self.weights)


@dataclass
class NmfModel:
    W: np.ndarray
    H: np.ndarray
    objective_trace: list[float] = field(default_factory=list)
    seed: int | None = None
    terms: list[str] | None = None

    @property
    def k(self) -> int:
        return self.W.shape[1]

    @property
    def n_terms(self) -> int:
        return self.W.shape[0]

    @property
    def n_iter(self) -> int:
        return max(len(self.objective_trace) - 1, 0)


def as_matrix(A):
    """Coerce a TermDocMatrix / sparse matrix / array-like into csr or float64 ndarray."""
    if isinstance(A, TermDocMatrix):
        return A.to_csc().tocsr()
    if sp.issparse(A):
        return sp.csr_matrix(A, dtype=np.float64)
    return np.asarray(A, dtype=np.float64)


def frobenius_error(A, W, H, block: int = 2048) -> float:
    """||A - WH||_F, computed in column blocks when A is sparse."""
    A = as_matrix(A)
    W = np.asarray(W, dtype=np.float64)
    H = np.asarray(H, dtype=np.float64)
    if W.ndim != 2 or H.ndim != 2 or W.shape[1] != H.shape[0] or A.shape != (W.shape[0], H.shape[1]):
        raise TopicModelError(
            f"dimension mismatch: A {A.shape}, W {W.shape}, H {H.shape}")
    if not sp.issparse(A):
        return float(np.linalg.norm(A - W @ H))
    A = A.tocsc()
    total = 0.0
    for j0 in range(0, A.shape[1], block):
        j1 = min(j0 + block, A.shape[1])
        R = A[:, j0:j1].toarray() - W @ H[:, j0:j1]
        total += float(np.einsum("ij,ij->", R, R))
    return float(np.sqrt(total))


def _update_h(A, W, H):
    WtA = (A.T @ W).T if sp.issparse(A) else W.T @ A
    H *= WtA / ((W.T @ W) @ H + EPS)
    return H


def _update_w(A, W, H):
    W *= (A @ H.T) / (W @ (H @ H.T) + EPS)
    return W


def nmf_train(A, k: int, max_iters: int = 200, tol: float = 1e-4, seed: int = 0,
              window: int = 10, init: tuple[np.ndarray, np.ndarray] | None = None,
              terms: list[str] | None = None) -> NmfModel:
    """Factorize ``A`` into nonnegative W, H.

    Each iteration applies the H update and then the W update. The error
    before the first iteration is ``objective_trace[0]``; one value is
    appended per iteration. Training stops once the error improved by less
    than ``tol`` (relative) over the last ``window`` iterations, or after
    ``max_iters``. ``tol=0`` disables early stopping.

    ``init`` overrides the seeded uniform (0, 1] initialization.
    """
    if k < 1:
        raise TopicModelError(f"topic count must be >= 1, got {k}")
    if max_iters < 1:
        raise TopicModelError(f"max_iters must be >= 1, got {max_iters}")
    A = as_matrix(A)
    if (A.nnz == 0 or not np.any(A.data)) if sp.issparse(A) else not np.any(A):
        raise TopicModelError("cannot factorize an all-zero matrix")
    if (A.data < 0).any() if sp.issparse(A) else (A < 0).any():
        raise TopicModelError("NMF input must be nonnegative")
    n, m = A.shape

    if init is None:
        rng = np.random.default_rng(seed)
        # 1 - U[0, 1) lies in (0, 1]; zero entries could never recover
        W = 1.0 - rng.random((n, k))
        H = 1.0 - rng.random((k, m))
    else:
        W = np.array(init[0], dtype=np.float64)
        H = np.array(init[1], dtype=np.float64)
        if W.shape != (n, k) or H.shape != (k, m):
            raise TopicModelError(f"init shapes {W.shape}, {H.shape} do not match ({n}, {k}), ({k}, {m})")
        if (W < 0).any() or (H < 0).any():
            raise TopicModelError("init factors must be nonnegative")

    trace = [frobenius_error(A, W, H)]
    for _ in range(max_iters):
        H = _update_h(A, W, H)
        W = _update_w(A, W, H)
        trace.append(frobenius_error(A, W, H))
        if trace[-1] == 0.0:
            break
        if tol > 0 and len(trace) > window:
            ref = trace[-1 - window]
            if ref - trace[-1] <= tol * ref:
                break
    return NmfModel(W, H, trace, seed, terms)


def nmf_fold_in_batch(model: NmfModel, X, max_iters: int = 300, tol: float = 1e-6) -> np.ndarray:
    """Fold the columns of ``X`` (terms x docs) into topic space with W frozen.

    Returns an (n_docs, k) array of L1-normalized topic weights. Each column
    runs the H update on its own until its relative change drops below
    ``tol``; an all-zero result maps to the uniform distribution.
    """
    X = as_matrix(X)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != model.n_terms:
        raise TopicModelError(f"vector dimension {X.shape[0]} != model terms {model.n_terms}")
    W = model.W
    WtW = W.T @ W
    WtX = np.asarray((X.T @ W).T if sp.issparse(X) else W.T @ X)
    k, b = WtX.shape
    H = np.ones((k, b))
    active = np.arange(b)
    for _ in range(max_iters):
        if active.size == 0:
            break
        h = H[:, active]
        new = h * WtX[:, active] / (WtW @ h + EPS)
        change = np.abs(new - h).sum(axis=0)
        scale = np.maximum(new.sum(axis=0), EPS)
        H[:, active] = new
        active = active[change > tol * scale]
    return normalize_rows(H.T)


def normalize_rows(M: np.ndarray) -> np.ndarray:
    """L1-normalize each row; all-zero rows become uniform."""
    M = np.array(M, dtype=np.float64)
    if M.ndim == 1:
        M = M[None, :]
    sums = M.sum(axis=1)
    zero = sums <= 0
    M[zero] = 1.0
    sums[zero] = M.shape[1]
    return M / sums[:, None]


def nmf_fold_in(model: NmfModel, x: SparseVector | np.ndarray, max_iters: int = 300,
                tol: float = 1e-6) -> TopicDistribution:
    if isinstance(x, SparseVector):
        if x.dim != model.n_terms:
            raise TopicModelError(f"vector dimension {x.dim} != model terms {model.n_terms}")
        x = x.to_dense()
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.n_terms,):
        raise TopicModelError(f"vector shape {x.shape} != ({model.n_terms},)")
    return TopicDistribution(nmf_fold_in_batch(model, x[:, None], max_iters, tol)[0])
