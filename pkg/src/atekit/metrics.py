"""Exact-span evaluation and run aggregation.

A predicted aspect term counts only if both its start and end match a gold
span in the same sentence.  Precision, recall, and F1 are micro-averaged
over the whole corpus; empty denominators score 0 by convention.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np
from scipy import stats

__all__ = [
    "Span",
    "PRF",
    "extract_spans",
    "prf",
    "confidence_interval",
    "summarize_runs",
    "write_metrics",
    "read_metrics",
]


@dataclass(frozen=True, order=True)
class Span:
    """Token span [start, end], inclusive, 0-based, tied to a sentence key."""

    key: Hashable
    start: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.end < self.start:
            raise ValueError(f"bad span [{self.start}, {self.end}]")


def extract_spans(tags: Sequence[str], key: Hashable = None) -> set[Span]:
    """Spans in an IOB sequence, lenient about malformed input: B starts a
    span, I extends the current one, and a stray I (at position 0 or after O)
    starts a new span."""
    spans: set[Span] = set()
    start: int | None = None
    for pos, tag in enumerate(tags):
        if tag == "B":
            if start is not None:
                spans.add(Span(key=key, start=start, end=pos - 1))
            start = pos
        elif tag == "I":
            if start is None:
                start = pos
        elif tag == "O":
            if start is not None:
                spans.add(Span(key=key, start=start, end=pos - 1))
                start = None
        else:
            raise ValueError(f"invalid IOB tag {tag!r} at position {pos}")
    if start is not None:
        spans.add(Span(key=key, start=start, end=len(tags) - 1))
    return spans


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    retrieved: int
    gold: int
    matched: int

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "retrieved": self.retrieved,
            "gold": self.gold,
            "matched": self.matched,
        }


def prf(pred: set[Span], gold: set[Span]) -> PRF:
    matched = len(pred & gold)
    p = matched / len(pred) if pred else 0.0
    r = matched / len(gold) if gold else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return PRF(precision=p, recall=r, f1=f1, retrieved=len(pred), gold=len(gold), matched=matched)


def confidence_interval(values: Sequence[float], level: float = 0.95) -> tuple[float, float]:
    """(mean, half-width) of a Student-t interval over independent run scores.

    Requires at least two values; the half-width uses the sample standard
    deviation (ddof=1).
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("need at least two values for an interval")
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    mean = float(arr.mean())
    sd = float(arr.std(ddof=1))
    quantile = float(stats.t.ppf(0.5 + level / 2, df=arr.size - 1))
    return mean, quantile * sd / math.sqrt(arr.size)


def summarize_runs(runs: Sequence[PRF], level: float = 0.95) -> dict:
    """Aggregate repeated-run scores into mean and CI half-width per metric."""
    if not runs:
        raise ValueError("no runs to summarize")
    out: dict = {"k": len(runs)}
    for name in ("precision", "recall", "f1"):
        vals = [getattr(r, name) for r in runs]
        if len(vals) >= 2:
            mean, half = confidence_interval(vals, level)
        else:
            mean, half = float(vals[0]), 0.0
        out[name] = {"mean": mean, "ci_half_width": half}
    return out


def write_metrics(payload: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True, indent=2)
        f.write("\n")


def read_metrics(path) -> dict:
    with open(path, encoding="utf-8") as f:
        return json.load(f)
