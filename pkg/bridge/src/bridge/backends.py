"""Parser and embedding backends.

A backend bundles the two operations the converters need: ``parse`` splits raw
text into dependency-parsed sentences, ``embed`` maps a token sequence to a
fixed-dimension vector.  Backends are looked up by name so an external parser
can be plugged in without touching converter code; the built-in one is a
deterministic heuristic parser intended for fixtures and offline runs, not for
linguistic accuracy.  Conversion output is reproducible for a pinned backend
version, which is why every backend must expose ``name`` and ``version``.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Protocol

from .records import BridgeError

__all__ = [
    "ParsedToken",
    "ParsedSentence",
    "Backend",
    "BuiltinBackend",
    "get_backend",
    "available_backends",
]


@dataclass(frozen=True)
class ParsedToken:
    """``start``/``end`` are character offsets into the original text."""

    form: str
    lemma: str
    upos: str
    head: int
    deprel: str
    start: int
    end: int


@dataclass(frozen=True)
class ParsedSentence:
    tokens: tuple[ParsedToken, ...]


class Backend(Protocol):
    name: str
    version: str
    dimension: int

    def parse(self, text: str) -> list[ParsedSentence]: ...

    def embed(self, forms: list[str]) -> list[float]: ...


# ---------------------------------------------------------------------------
# Built-in deterministic backend
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"\d+(?:[.,]\d+)*|\w+(?:'\w+)*|[^\w\s]")
_NUM_RE = re.compile(r"^\d+(?:[.,]\d+)*$")
_SENT_BREAK_RE = re.compile(r"[.!?]+(?:\s+|$)")

_DET = frozenset("the a an this that these those my your his its our their some any no every each".split())
_PRON = frozenset("i you he she it we they me him her us them who what something everything nothing anyone".split())
_AUX = frozenset("is are was were be been being am do does did have has had will would can could should may might must".split())
_CCONJ = frozenset("and or but nor".split())
_ADP = frozenset("of in on at with for from to by about over under after before between into through".split())
_ADV = frozenset("not n't very really too so quite just also still never always often barely extremely even well".split())
_VERB = frozenset(
    "love hate like adore enjoy recommend bought buy use used works work runs run broke break "
    "returned return arrived arrive lasts last feels feel looks look want wanted need needed got get".split()
)
_ADJ = frozenset(
    "great good bad awful amazing superb terrible excellent nice poor fantastic horrible beautiful "
    "sturdy flimsy fast slow cheap expensive bright dim loud quiet comfortable reliable crisp sharp "
    "responsive durable hard soft big small new old happy disappointed".split()
)
_ADJ_SUFFIXES = ("ful", "ous", "ive", "able", "ible", "less", "ish")

_NOMINAL = ("NOUN", "PROPN")


def _classify(form: str, sentence_initial: bool) -> str:
    lower = form.lower()
    if not any(ch.isalnum() for ch in form):
        return "PUNCT"
    if _NUM_RE.match(form):
        return "NUM"
    for table, upos in ((_DET, "DET"), (_PRON, "PRON"), (_AUX, "AUX"), (_CCONJ, "CCONJ"),
                        (_ADP, "ADP"), (_ADV, "ADV"), (_VERB, "VERB"), (_ADJ, "ADJ")):
        if lower in table:
            return upos
    # suffix must leave a real stem so "drive" stays nominal
    if any(lower.endswith(s) and len(lower) - len(s) >= 3 for s in _ADJ_SUFFIXES):
        return "ADJ"
    if lower.endswith("ly"):
        return "ADV"
    if len(form) >= 2 and form.isupper():
        return "PROPN"
    if form[0].isupper() and not sentence_initial:
        return "PROPN"
    return "NOUN"


def _lemma(form: str, upos: str) -> str:
    lower = form.lower()
    if upos in ("NOUN", "PROPN", "VERB") and len(lower) > 3 and lower.endswith("s") and not lower.endswith("ss"):
        return lower[:-1]
    return lower


def _noun_runs(upos: list[str], lo: int, hi: int) -> list[list[int]]:
    """Maximal runs of adjacent nominal tokens inside [lo, hi)."""
    runs: list[list[int]] = []
    i = lo
    while i < hi:
        if upos[i] in _NOMINAL:
            run = [i]
            while i + 1 < hi and upos[i + 1] in _NOMINAL:
                i += 1
                run.append(i)
            runs.append(run)
        i += 1
    return runs


def _attach(upos: list[str]) -> tuple[list[int], list[str]]:
    """Heads (1-based, 0 for root) and deprels for one sentence.

    The scheme is intentionally small: pick a content root, hang subjects and
    objects off it, chain compounds and conjuncts inside noun runs, and default
    everything unexplained to the root.  Output is always a single-rooted tree.
    """
    n = len(upos)
    root = next((i for i in range(n) if upos[i] == "VERB"),
                next((i for i in range(n) if upos[i] == "ADJ"),
                     next((i for i in range(n) if upos[i] in _NOMINAL), 0)))
    head = [root + 1] * n
    rel = ["dep"] * n

    pre_runs = _noun_runs(upos, 0, root)
    post_runs = _noun_runs(upos, root + 1, n)
    subject: int | None = None
    object_: int | None = None

    for run in pre_runs:
        top = run[-1]
        for idx in run[:-1]:
            head[idx], rel[idx] = top + 1, "compound"
        if subject is None:
            head[top], rel[top] = root + 1, "nsubj"
            subject = top
        else:
            head[top], rel[top] = subject + 1, "conj"

    first_post: int | None = None
    prev_post: int | None = None
    for run in post_runs:
        top = run[-1]
        for idx in run[:-1]:
            head[idx], rel[idx] = top + 1, "compound"
        adp = _preceding_adp(upos, run[0])
        if adp is not None:
            head[adp], rel[adp] = top + 1, "case"
            anchor = prev_post if prev_post is not None else root
            head[top] = anchor + 1
            rel[top] = "nmod" if upos[anchor] in _NOMINAL else "obl"
        elif first_post is None:
            if upos[root] == "VERB":
                head[top], rel[top] = root + 1, "obj"
                object_ = top
            elif subject is None:
                head[top], rel[top] = root + 1, "nsubj"
                subject = top
            else:
                head[top], rel[top] = root + 1, "nmod"
        elif _has_cconj_between(upos, prev_post, top):
            head[top], rel[top] = first_post + 1, "conj"
        else:
            head[top], rel[top] = prev_post + 1, "nmod"
        if first_post is None:
            first_post = top
        prev_post = top

    for i in range(n):
        if upos[i] in _NOMINAL or i == root:
            continue
        kind = upos[i]
        if kind == "PUNCT":
            rel[i] = "punct"
        elif kind == "DET":
            target = next((j for j in range(i + 1, n) if upos[j] in _NOMINAL), None)
            if target is not None:
                head[i], rel[i] = target + 1, "det"
        elif kind == "AUX":
            rel[i] = "cop" if upos[root] != "VERB" else "aux"
        elif kind == "ADJ":
            target = next(
                (j for j in range(i + 1, min(i + 4, n)) if upos[j] in _NOMINAL),
                None,
            )
            if target is not None and not any(upos[k] in ("VERB", "AUX", "ADP") for k in range(i + 1, target)):
                head[i], rel[i] = target + 1, "amod"
            elif upos[root] == "ADJ":
                rel[i] = "conj"
            elif upos[root] == "VERB":
                rel[i] = "xcomp"
        elif kind == "ADV":
            target = next((j for j in range(i - 1, -1, -1) if upos[j] in ("VERB", "ADJ")), None)
            if target is None:
                target = next((j for j in range(i + 1, n) if upos[j] in ("VERB", "ADJ")), None)
            if target is not None and target != i:
                head[i] = target + 1
            rel[i] = "advmod"
        elif kind == "CCONJ":
            target = next((j for j in range(i + 1, n) if upos[j] in _NOMINAL or upos[j] == "ADJ"), None)
            if target is not None:
                head[i] = target + 1
            rel[i] = "cc"
        elif kind == "PRON":
            if i < root and subject is None:
                rel[i] = "nsubj"
                subject = i
            elif i > root and upos[root] == "VERB" and object_ is None:
                rel[i] = "obj"
                object_ = i

    head[root], rel[root] = 0, "root"
    return _ensure_tree(head, rel, root)


def _preceding_adp(upos: list[str], run_start: int) -> int | None:
    j = run_start - 1
    while j >= 0 and upos[j] in ("DET", "ADJ", "ADV"):
        j -= 1
    return j if j >= 0 and upos[j] == "ADP" else None


def _has_cconj_between(upos: list[str], lo: int | None, hi: int) -> bool:
    if lo is None:
        return False
    return any(upos[k] == "CCONJ" for k in range(lo + 1, hi))


def _ensure_tree(head: list[int], rel: list[str], root: int) -> tuple[list[int], list[str]]:
    # defensive: the rules above should never loop, but a malformed head chain
    # must not reach the output file
    n = len(head)
    for i in range(n):
        if i != root and head[i] == i + 1:
            head[i], rel[i] = root + 1, "dep"
    for i in range(n):
        seen = set()
        cur = i
        while cur != root and head[cur] != 0:
            if cur in seen:
                head[cur], rel[cur] = root + 1, "dep"
                break
            seen.add(cur)
            cur = head[cur] - 1
    return head, rel


class BuiltinBackend:
    """Regex tokenizer, closed-class POS tables, and a fixed attachment scheme.

    Embeddings hash each token into a pseudo-random unit-range vector and
    average, so identical token sequences always map to identical vectors.
    """

    name = "builtin"
    version = "1.0.0"

    def __init__(self, dimension: int = 600):
        if dimension < 1:
            raise BridgeError(f"dimension must be positive, got {dimension}")
        self.dimension = dimension

    def parse(self, text: str) -> list[ParsedSentence]:
        sentences = []
        for lo, hi in self._sentence_spans(text):
            matches = list(_TOKEN_RE.finditer(text, lo, hi))
            if not matches:
                continue
            upos = [_classify(m.group(), i == 0) for i, m in enumerate(matches)]
            head, rel = _attach(upos)
            tokens = tuple(
                ParsedToken(form=m.group(), lemma=_lemma(m.group(), upos[i]), upos=upos[i],
                            head=head[i], deprel=rel[i], start=m.start(), end=m.end())
                for i, m in enumerate(matches)
            )
            sentences.append(ParsedSentence(tokens=tokens))
        return sentences

    def embed(self, forms: list[str]) -> list[float]:
        acc = [0.0] * self.dimension
        if not forms:
            return acc
        for form in forms:
            key = form.lower()
            for block in range((self.dimension + 3) // 4):
                digest = hashlib.sha256(f"{key}|{block}".encode()).digest()
                for j in range(4):
                    pos = block * 4 + j
                    if pos >= self.dimension:
                        break
                    raw = int.from_bytes(digest[j * 8 : (j + 1) * 8], "big")
                    acc[pos] += raw / 2**64 * 2.0 - 1.0
        return [round(v / len(forms), 6) for v in acc]

    @staticmethod
    def _sentence_spans(text: str) -> list[tuple[int, int]]:
        spans = []
        start = 0
        for match in _SENT_BREAK_RE.finditer(text):
            if text[start : match.end()].strip():
                spans.append((start, match.end()))
            start = match.end()
        if text[start:].strip():
            spans.append((start, len(text)))
        return spans


_REGISTRY = {"builtin": BuiltinBackend}


def available_backends() -> list[str]:
    return sorted(_REGISTRY)


def get_backend(name: str, dimension: int | None = None) -> Backend:
    factory = _REGISTRY.get(name)
    if factory is None:
        raise BridgeError(f"unknown backend {name!r}; available: {', '.join(available_backends())}")
    return factory() if dimension is None else factory(dimension=dimension)
