"""Sentence embeddings: precomputed vectors or mean-of-word-vectors fallback.

Either source resolves a (review_id, sent_index) pair to a d-dimensional
vector; pad sentences always map to zeros.  Tables are read-only after load.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .corpus import Review, Sentence

__all__ = [
    "WordVectorTable",
    "SentenceEmbedding",
    "EmbeddingError",
    "load_word_vectors",
    "load_sentence_vectors",
    "embed_sentence_avg",
    "AveragingSource",
    "PrecomputedSource",
    "review_matrix",
]


class EmbeddingError(ValueError):
    pass


@dataclass(frozen=True)
class WordVectorTable:
    dimension: int
    entries: dict[str, np.ndarray]

    def __contains__(self, token: str) -> bool:
        return token in self.entries


@dataclass(frozen=True)
class SentenceEmbedding:
    vector: np.ndarray
    review_id: str
    sent_index: int


def load_word_vectors(path) -> WordVectorTable:
    """Load a text-format vector table: header ``<count> <d>``, then one
    ``<token> <f1> ... <fd>`` row per line."""
    entries: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2:
            raise EmbeddingError(f"{path}: missing '<count> <dim>' header line")
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise EmbeddingError(f"{path}: non-integer header fields {header}") from None
        if dim <= 0:
            raise EmbeddingError(f"{path}: dimension must be positive, got {dim}")
        for rowno, line in enumerate(f, start=2):
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise EmbeddingError(f"{path}: row {rowno} has {len(parts) - 1} values, expected {dim}")
            token = parts[0]
            if token in entries:
                raise EmbeddingError(f"{path}: row {rowno} duplicates token {token!r}")
            entries[token] = np.asarray([float(x) for x in parts[1:]], dtype=np.float64)
    if len(entries) != count:
        raise EmbeddingError(f"{path}: header declares {count} rows, found {len(entries)}")
    return WordVectorTable(dimension=dim, entries=entries)


def load_sentence_vectors(path) -> dict[tuple[str, int], SentenceEmbedding]:
    """Load JSON-lines sentence vectors keyed by (review_id, sent_index)."""
    table: dict[tuple[str, int], SentenceEmbedding] = {}
    dim = None
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            rec = json.loads(line)
            key = (rec["review_id"], int(rec["sent_index"]))
            if key in table:
                raise EmbeddingError(f"{path}: line {lineno} duplicates key {key}")
            vec = np.asarray(rec["vector"], dtype=np.float64)
            if dim is None:
                dim = vec.shape[0]
            elif vec.shape[0] != dim:
                raise EmbeddingError(
                    f"{path}: line {lineno} has dimension {vec.shape[0]}, expected {dim}"
                )
            table[key] = SentenceEmbedding(vector=vec, review_id=key[0], sent_index=key[1])
    return table


def embed_sentence_avg(
    sentence: Sentence, table: WordVectorTable, lowercase: bool = True
) -> SentenceEmbedding:
    """Mean of in-vocabulary token vectors; zero vector for pads and all-OOV."""
    vecs = []
    for tok in sentence.tokens:
        form = tok.form.lower() if lowercase else tok.form
        hit = table.entries.get(form)
        if hit is not None:
            vecs.append(hit)
    if vecs:
        vector = np.mean(vecs, axis=0)
    else:
        vector = np.zeros(table.dimension, dtype=np.float64)
    return SentenceEmbedding(vector=vector, review_id=sentence.review_id,
                             sent_index=sentence.sent_index)


class AveragingSource:
    """Embedding source backed by word-vector averaging."""

    def __init__(self, table: WordVectorTable, lowercase: bool = True):
        self.table = table
        self.lowercase = lowercase

    @property
    def dimension(self) -> int:
        return self.table.dimension

    def vector(self, sentence: Sentence) -> np.ndarray:
        return embed_sentence_avg(sentence, self.table, self.lowercase).vector


class PrecomputedSource:
    """Embedding source backed by a loaded sentence-vector table."""

    def __init__(self, table: dict[tuple[str, int], SentenceEmbedding]):
        if not table:
            raise EmbeddingError("empty sentence-vector table")
        self.table = table
        self._dim = next(iter(table.values())).vector.shape[0]

    @property
    def dimension(self) -> int:
        return self._dim

    def vector(self, sentence: Sentence) -> np.ndarray:
        hit = self.table.get(sentence.key)
        if hit is None:
            raise EmbeddingError(
                f"no sentence vector for (review_id, sent_index) = {sentence.key}"
            )
        return hit.vector


def review_matrix(review: Review, source, n_max: int):
    """Stack per-sentence embeddings of a (padded) review into an
    ``n_max x d`` matrix plus pad mask.  Pad rows are exactly zero."""
    from .attention import ReviewMatrix  # avoids a module cycle at import time

    if len(review.sentences) != n_max:
        raise ValueError(
            f"review {review.review_id!r} has {len(review.sentences)} sentences; pad to n_max={n_max} first"
        )
    d = source.dimension
    mat = np.zeros((n_max, d), dtype=np.float64)
    mask = np.zeros(n_max, dtype=bool)
    for i, sent in enumerate(review.sentences):
        if sent.is_pad:
            continue
        mask[i] = True
        mat[i] = source.vector(sent)
    return ReviewMatrix(s_prime=mat, pad_mask=mask)
