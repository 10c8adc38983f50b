"""Input record types and their validation.

Raw reviews arrive as JSON-lines ``{"review_id", "stars", "text"}``; gold
evaluation data arrives as SemEval-2014 ABSA XML.  Both are validated here
before any conversion touches them, so converter code never sees a malformed
record.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field


class BridgeError(ValueError):
    """Invalid input data or an unusable backend."""


@dataclass(frozen=True)
class RawReview:
    review_id: str
    stars: int
    text: str

    def __post_init__(self):
        if not isinstance(self.review_id, str) or not self.review_id.strip():
            raise BridgeError("review_id must be a non-empty string")
        if any(ch in self.review_id for ch in "\n\r\t"):
            raise BridgeError(f"review_id {self.review_id!r} contains control characters")
        if isinstance(self.stars, bool) or not isinstance(self.stars, int):
            raise BridgeError(f"stars must be an integer, got {self.stars!r}")
        if not 1 <= self.stars <= 5:
            raise BridgeError(f"stars {self.stars} outside 1..5")
        if not isinstance(self.text, str) or not self.text.strip():
            raise BridgeError("text must be a non-empty string")

    @classmethod
    def from_json_line(cls, line: str) -> "RawReview":
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BridgeError(f"invalid JSON: {exc}") from None
        if not isinstance(payload, dict):
            raise BridgeError("record is not a JSON object")
        missing = {"review_id", "stars", "text"} - payload.keys()
        if missing:
            raise BridgeError(f"record missing keys {sorted(missing)}")
        return cls(payload["review_id"], payload["stars"], payload["text"])


@dataclass(frozen=True)
class GoldTerm:
    """One aspect-term annotation as character offsets into the sentence text."""

    term: str
    start: int
    end: int

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise BridgeError(f"term {self.term!r} has invalid offsets [{self.start}, {self.end})")


@dataclass(frozen=True)
class GoldSentence:
    sent_id: str
    text: str
    terms: tuple[GoldTerm, ...]

    def __post_init__(self):
        if not self.sent_id.strip():
            raise BridgeError("sentence id must be non-empty")
        if not self.text.strip():
            raise BridgeError(f"sentence {self.sent_id!r} has empty text")
        ordered = tuple(sorted(self.terms, key=lambda t: (t.start, t.end)))
        object.__setattr__(self, "terms", ordered)
        prev_end = -1
        for term in ordered:
            if term.end > len(self.text):
                raise BridgeError(
                    f"sentence {self.sent_id!r}: term {term.term!r} ends at {term.end}, "
                    f"past text length {len(self.text)}"
                )
            if term.start < prev_end:
                raise BridgeError(f"sentence {self.sent_id!r}: overlapping terms at {term.start}")
            prev_end = term.end


@dataclass(frozen=True)
class GoldDocument:
    sentences: tuple[GoldSentence, ...] = field(default_factory=tuple)

    def __post_init__(self):
        seen = set()
        for sent in self.sentences:
            if sent.sent_id in seen:
                raise BridgeError(f"duplicate sentence id {sent.sent_id!r}")
            seen.add(sent.sent_id)
