"""Topic models over the term-document matrix: NMF, LDA, and fold-in inference."""

from __future__ import annotations

import numpy as np

from siterank.topicmodel.io import ModelFormatError, load_model, save_model
from siterank.topicmodel.lda import LdaModel, lda_fold_in, lda_train
from siterank.topicmodel.nmf import (NmfModel, TopicDistribution, TopicModelError,
                                     frobenius_error, nmf_fold_in, nmf_fold_in_batch,
                                     nmf_train, normalize_rows)

__all__ = [
    "LdaModel", "ModelFormatError", "NmfModel", "TopicDistribution", "TopicModelError",
    "frobenius_error", "lda_fold_in", "lda_train", "load_model", "nmf_fold_in",
    "nmf_fold_in_batch", "nmf_train", "normalize_rows", "save_model", "topic_word_weights",
    "top_words",
]


def topic_word_weights(model: NmfModel | LdaModel, topic: int) -> np.ndarray:
    if not 0 <= topic < model.k:
        raise TopicModelError(f"topic index {topic} out of range [0, {model.k})")
    if isinstance(model, NmfModel):
        return model.W[:, topic]
    return model.beta[topic]


def top_words(model: NmfModel | LdaModel, topic: int, n: int = 10) -> list[tuple[str, float]]:
    """The ``n`` heaviest terms of one topic, descending, ties broken by term id.

    Terms are reported by string when the model carries its vocabulary,
    otherwise by their id rendered as a string.
    """
    weights = topic_word_weights(model, topic)
    order = np.lexsort((np.arange(weights.size), -weights))[:n]
    terms = model.terms
    return [(terms[i] if terms is not None else str(i), float(weights[i])) for i in order]
