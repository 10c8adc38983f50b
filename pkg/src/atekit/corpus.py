"""Data model and reader/writer for dependency-parsed review corpora.

The on-disk interchange format is CoNLL-U with three extra metadata comments
per sentence block (``# review_id``, ``# stars``, ``# sent_index``).  All
types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

__all__ = [
    "Token",
    "Sentence",
    "Review",
    "CorpusConfig",
    "CorpusError",
    "parse_conllu",
    "parse_conllu_file",
    "write_conllu",
    "write_conllu_file",
    "filter_reviews",
    "pad_review",
    "strip_padding",
    "split_dataset",
    "gold_tags",
]


class CorpusError(ValueError):
    """Malformed corpus data.  Carries the 1-based input line when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Token:
    """One token of a dependency-parsed sentence.

    ``index`` is 1-based, ``head`` points at the governor's index (0 for the
    root), ``misc`` carries the verbatim CoNLL-U MISC column (``Gold=B`` marks
    gold aspect tags in evaluation corpora).
    """

    index: int
    form: str
    lemma: str
    upos: str
    head: int
    deprel: str
    misc: str = "_"


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]
    review_id: str
    sent_index: int
    is_pad: bool = False

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]

    @property
    def key(self) -> tuple[str, int]:
        return (self.review_id, self.sent_index)


@dataclass(frozen=True)
class Review:
    review_id: str
    stars: int
    sentences: tuple[Sentence, ...]

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))

    def __len__(self) -> int:
        return len(self.sentences)

    @property
    def real_sentences(self) -> list[Sentence]:
        return [s for s in self.sentences if not s.is_pad]


@dataclass(frozen=True)
class CorpusConfig:
    n_min: int = 3
    n_max: int = 10

    def __post_init__(self):
        if not (1 <= self.n_min <= self.n_max):
            raise ValueError(f"need 1 <= n_min <= n_max, got ({self.n_min}, {self.n_max})")


def check_tree(tokens: Sequence[Token], line: int | None = None) -> None:
    """Validate the single-rooted, cycle-free dependency tree invariants."""
    n = len(tokens)
    for pos, tok in enumerate(tokens, start=1):
        if tok.index != pos:
            raise CorpusError(f"token indices not contiguous: expected {pos}, got {tok.index}", line)
        if tok.head < 0 or tok.head > n:
            raise CorpusError(f"token {tok.index}: head {tok.head} outside sentence of length {n}", line)
        if tok.head == tok.index:
            raise CorpusError(f"token {tok.index}: head points at itself", line)
    roots = [t.index for t in tokens if t.head == 0]
    if len(roots) != 1:
        raise CorpusError(f"expected exactly one root token, found {len(roots)}", line)
    # Cycle check: every token must reach the root by following heads.
    for tok in tokens:
        seen = set()
        cur = tok.index
        while cur != 0:
            if cur in seen:
                raise CorpusError(f"dependency cycle involving token {tok.index}", line)
            seen.add(cur)
            cur = tokens[cur - 1].head


_META_KEYS = ("review_id", "stars", "sent_index")


def _parse_block(lines: list[tuple[int, str]]) -> tuple[Sentence, int]:
    """Parse one sentence block (list of (lineno, text) pairs) into (sentence, stars)."""
    meta: dict[str, str] = {}
    tokens: list[Token] = []
    first_line = lines[0][0]
    for lineno, text in lines:
        if text.startswith("#"):
            body = text[1:].strip()
            if "=" in body:
                key, value = body.split("=", 1)
                meta.setdefault(key.strip(), value.strip())
            continue
        cols = text.split("\t")
        if len(cols) != 10:
            raise CorpusError(f"expected 10 tab-separated columns, got {len(cols)}", lineno)
        try:
            index = int(cols[0])
        except ValueError:
            raise CorpusError(f"non-integer token ID {cols[0]!r}", lineno) from None
        try:
            head = int(cols[6])
        except ValueError:
            raise CorpusError(f"non-integer head {cols[6]!r}", lineno) from None
        tokens.append(
            Token(index=index, form=cols[1], lemma=cols[2], upos=cols[3],
                  head=head, deprel=cols[7], misc=cols[9])
        )
    for key in _META_KEYS:
        if key not in meta:
            raise CorpusError(f"sentence block missing '# {key} =' metadata", first_line)
    try:
        stars = int(meta["stars"])
    except ValueError:
        raise CorpusError(f"non-integer stars {meta['stars']!r}", first_line) from None
    if not (1 <= stars <= 5):
        raise CorpusError(f"stars {stars} outside 1..5", first_line)
    try:
        sent_index = int(meta["sent_index"])
    except ValueError:
        raise CorpusError(f"non-integer sent_index {meta['sent_index']!r}", first_line) from None
    if sent_index < 0:
        raise CorpusError(f"negative sent_index {sent_index}", first_line)
    if not tokens:
        raise CorpusError("sentence block has no tokens", first_line)
    check_tree(tokens, first_line)
    sent = Sentence(tokens=tuple(tokens), review_id=meta["review_id"], sent_index=sent_index)
    return sent, stars


def parse_conllu(source: str | TextIO) -> list[Review]:
    """Parse an interchange-format corpus into reviews.

    Sentences are grouped by review id (reviews ordered by first appearance)
    and ordered by ``sent_index``, which must be contiguous from 0 within each
    review.  All structural invariants are checked; violations raise
    :class:`CorpusError` naming the offending line.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    blocks: list[list[tuple[int, str]]] = []
    current: list[tuple[int, str]] = []
    for lineno, raw in enumerate(source, start=1):
        text = raw.rstrip("\n")
        if text.strip() == "":
            if current:
                blocks.append(current)
                current = []
        else:
            current.append((lineno, text))
    if current:
        blocks.append(current)

    by_review: dict[str, dict[int, Sentence]] = {}
    review_stars: dict[str, int] = {}
    order: list[str] = []
    for block in blocks:
        sent, stars = _parse_block(block)
        first_line = block[0][0]
        rid = sent.review_id
        if rid not in by_review:
            by_review[rid] = {}
            review_stars[rid] = stars
            order.append(rid)
        elif review_stars[rid] != stars:
            raise CorpusError(f"conflicting stars for review {rid!r}", first_line)
        if sent.sent_index in by_review[rid]:
            raise CorpusError(f"duplicate (review_id, sent_index) = ({rid!r}, {sent.sent_index})", first_line)
        by_review[rid][sent.sent_index] = sent

    reviews = []
    for rid in order:
        sents = by_review[rid]
        expected = set(range(len(sents)))
        if set(sents) != expected:
            raise CorpusError(f"review {rid!r}: sent_index values {sorted(sents)} are not contiguous from 0")
        reviews.append(Review(review_id=rid, stars=review_stars[rid],
                              sentences=tuple(sents[i] for i in range(len(sents)))))
    return reviews


def parse_conllu_file(path) -> list[Review]:
    with open(path, encoding="utf-8") as f:
        return parse_conllu(f)


def write_conllu(reviews: Iterable[Review], out: TextIO) -> None:
    """Write reviews in the interchange format.  Pad sentences never hit disk."""
    for review in reviews:
        for sent in review.sentences:
            if sent.is_pad:
                continue
            out.write(f"# review_id = {review.review_id}\n")
            out.write(f"# stars = {review.stars}\n")
            out.write(f"# sent_index = {sent.sent_index}\n")
            for t in sent.tokens:
                out.write(f"{t.index}\t{t.form}\t{t.lemma}\t{t.upos}\t_\t_\t{t.head}\t{t.deprel}\t_\t{t.misc}\n")
            out.write("\n")


def write_conllu_file(reviews: Iterable[Review], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        write_conllu(reviews, f)


def filter_reviews(reviews: Sequence[Review], cfg: CorpusConfig) -> list[Review]:
    """Keep exactly the reviews whose real-sentence count is within bounds."""
    return [r for r in reviews if cfg.n_min <= len(r.real_sentences) <= cfg.n_max]


def pad_review(review: Review, n_max: int) -> Review:
    """Extend a review with trailing empty pad sentences up to ``n_max``."""
    if len(review.sentences) > n_max:
        raise ValueError(
            f"review {review.review_id!r} has {len(review.sentences)} sentences, more than n_max={n_max}"
        )
    pads = tuple(
        Sentence(tokens=(), review_id=review.review_id, sent_index=i, is_pad=True)
        for i in range(len(review.sentences), n_max)
    )
    return Review(review_id=review.review_id, stars=review.stars,
                  sentences=review.sentences + pads)


def strip_padding(review: Review) -> Review:
    return Review(review_id=review.review_id, stars=review.stars,
                  sentences=tuple(review.real_sentences))


def split_dataset(
    reviews: Sequence[Review], seed: int, sizes: tuple[int, int, int]
) -> tuple[list[Review], list[Review], list[Review]]:
    """Deterministically partition reviews into train/val/test of the given sizes."""
    n_train, n_val, n_test = sizes
    total = n_train + n_val + n_test
    if total > len(reviews):
        raise ValueError(f"requested {total} reviews but corpus has only {len(reviews)}")
    perm = np.random.default_rng(seed).permutation(len(reviews))
    picked = [reviews[i] for i in perm[:total]]
    return (picked[:n_train], picked[n_train : n_train + n_val], picked[n_train + n_val :])


def gold_tags(sentence: Sentence) -> list[str] | None:
    """Extract gold IOB tags from ``Gold=`` MISC annotations.

    Returns None when no token in the sentence carries one; tokens without an
    annotation default to ``O``.
    """
    tags = []
    any_gold = False
    for t in sentence.tokens:
        tag = "O"
        for part in t.misc.split("|"):
            if part.startswith("Gold="):
                tag = part[len("Gold=") :]
                any_gold = True
        tags.append(tag)
    return tags if any_gold else None
