"""Turn a trained attention matrix into per-sentence scores and filter by them.

Per review: sum the attention matrix over hops, min-max normalize to [0, 1],
keep sentences scoring at least the threshold.  Normalization is per review,
never corpus-global.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .attention import AttentionParams, attention_matrix
from .corpus import Review, Sentence, pad_review
from .embeddings import review_matrix

__all__ = [
    "SentenceScore",
    "SelectionConfig",
    "hop_sum",
    "normalize_minmax",
    "select",
    "score_corpus",
    "write_scores",
    "read_scores",
]


@dataclass(frozen=True)
class SentenceScore:
    review_id: str
    sent_index: int
    raw: float
    normalized: float


@dataclass(frozen=True)
class SelectionConfig:
    v_th: float = 0.7

    def __post_init__(self):
        if not (0.0 <= self.v_th <= 1.0):
            raise ValueError(f"threshold must be in [0, 1], got {self.v_th}")


def hop_sum(A: np.ndarray, pad_mask: np.ndarray) -> np.ndarray:
    """Sum the attention matrix over all hops, restricted to real sentences."""
    return A.sum(axis=0)[pad_mask]


def normalize_minmax(a_bar: np.ndarray) -> np.ndarray:
    """Rescale to minimum 0 and maximum 1.

    When all values coincide there is no evidence to rank on, so every
    sentence scores 1 and survives any threshold.
    """
    if a_bar.size == 0:
        raise ValueError("cannot normalize an empty score vector")
    lo, hi = a_bar.min(), a_bar.max()
    if hi == lo:
        return np.ones_like(a_bar, dtype=np.float64)
    return (a_bar - lo) / (hi - lo)


def select(review: Review, x: np.ndarray, cfg: SelectionConfig) -> list[Sentence]:
    """Sentences whose normalized score reaches the threshold, original order."""
    real = review.real_sentences
    if len(real) != len(x):
        raise ValueError(f"{len(x)} scores for {len(real)} real sentences")
    return [s for s, xi in zip(real, x) if xi >= cfg.v_th]


def score_corpus(
    params: AttentionParams, source, reviews: list[Review], n_max: int
) -> list[SentenceScore]:
    """One score per real sentence, in the original (unshuffled) order."""
    scores: list[SentenceScore] = []
    for review in reviews:
        padded = pad_review(review, n_max)
        rm = review_matrix(padded, source, n_max)
        A = attention_matrix(rm, params)
        raw = hop_sum(A, rm.pad_mask)
        norm = normalize_minmax(raw)
        for sent, r, x in zip(review.real_sentences, raw, norm):
            scores.append(SentenceScore(review_id=sent.review_id, sent_index=sent.sent_index,
                                        raw=float(r), normalized=float(x)))
    return scores


def write_scores(scores: list[SentenceScore], out) -> None:
    for s in scores:
        out.write(json.dumps(
            {"review_id": s.review_id, "sent_index": s.sent_index,
             "raw": s.raw, "normalized": s.normalized},
            sort_keys=True))
        out.write("\n")


def read_scores(path) -> dict[tuple[str, int], SentenceScore]:
    table: dict[tuple[str, int], SentenceScore] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            score = SentenceScore(review_id=rec["review_id"], sent_index=int(rec["sent_index"]),
                                  raw=float(rec["raw"]), normalized=float(rec["normalized"]))
            table[(score.review_id, score.sent_index)] = score
    return table
