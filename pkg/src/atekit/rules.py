"""Automated IOB labelling of sentences via syntactic rules over dependency trees.

Twelve rules fire on configurations linking candidate nouns to sentiment-
lexicon words (base rules) or to already-marked aspects (propagation rules,
iterated to fixpoint).  Rules are written against Universal Dependencies
labels; Stanford-style labels are normalized through an alias table.

Token positions are 0-based throughout this module.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TextIO

from .corpus import Sentence, Token

__all__ = [
    "SentimentLexicon",
    "LabelerConfig",
    "SyntacticRule",
    "LabeledSentence",
    "load_lexicon",
    "default_rules",
    "rules_by_name",
    "build_noun_counts",
    "candidate_tokens",
    "apply_rules",
    "assign_iob",
    "label_corpus",
    "write_ald",
    "read_ald",
    "read_tagged",
]

NOUN_TAGS = frozenset({"NOUN", "PROPN"})

_DEPREL_ALIASES = {
    "dobj": "obj",
    "nn": "compound",
    "nsubjpass": "nsubj",
    "dative": "iobj",
    "prep": "nmod",
    "pobj": "nmod",
}


def normalize_deprel(label: str) -> str:
    base = label.lower().split(":", 1)[0]
    return _DEPREL_ALIASES.get(base, base)


class SentimentLexicon:
    """Term -> polarity table; rule firing uses membership only."""

    def __init__(self, entries: dict[str, float]):
        self.entries = {term.lower(): float(pol) for term, pol in entries.items()}

    def __len__(self) -> int:
        return len(self.entries)

    def contains(self, token: Token) -> bool:
        return token.lemma.lower() in self.entries or token.form.lower() in self.entries

    def polarity(self, token: Token) -> float | None:
        hit = self.entries.get(token.lemma.lower())
        if hit is None:
            hit = self.entries.get(token.form.lower())
        return hit


def load_lexicon(path) -> SentimentLexicon:
    """Load a ``<term><TAB><polarity>`` file."""
    entries: dict[str, float] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}: line {lineno}: expected '<term>\\t<polarity>'")
            try:
                pol = float(parts[1])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-numeric polarity {parts[1]!r}") from None
            entries[parts[0]] = pol
    return SentimentLexicon(entries)


@dataclass(frozen=True)
class LabelerConfig:
    min_support: int = 30
    candidate_mode: str = "nouns_only"  # or "nouns_and_phrases"
    max_propagation_rounds: int | None = None  # None = sentence length
    # "at_least" keeps frequent nouns (minimum-support reading); "less_than"
    # keeps infrequent ones (the literal wording this reading replaces).
    support_direction: str = "at_least"

    def __post_init__(self):
        if self.min_support < 1:
            raise ValueError("min_support must be >= 1")
        if self.candidate_mode not in ("nouns_only", "nouns_and_phrases"):
            raise ValueError(f"unknown candidate_mode {self.candidate_mode!r}")
        if self.support_direction not in ("at_least", "less_than"):
            raise ValueError(f"unknown support_direction {self.support_direction!r}")


class _View:
    """Precomputed arc indexes for one sentence."""

    def __init__(self, sentence: Sentence, lexicon: SentimentLexicon):
        self.tokens = sentence.tokens
        self.opinion = [lexicon.contains(t) for t in self.tokens]
        self.upos = [t.upos for t in self.tokens]
        # (head_pos, dep_pos, normalized relation); root arcs are skipped
        self.arcs: list[tuple[int, int, str]] = []
        for pos, tok in enumerate(self.tokens):
            if tok.head > 0:
                self.arcs.append((tok.head - 1, pos, normalize_deprel(tok.deprel)))
        self.deps_of: dict[int, list[tuple[int, str]]] = {}
        for h, d, rel in self.arcs:
            self.deps_of.setdefault(h, []).append((d, rel))

    def deps(self, head: int, rel: str) -> list[int]:
        return [d for d, r in self.deps_of.get(head, []) if r == rel]

    def has_dep(self, head: int, rel: str) -> bool:
        return any(r == rel for _, r in self.deps_of.get(head, []))


RuleFn = Callable[[_View, frozenset, frozenset], set[int]]


@dataclass(frozen=True)
class SyntacticRule:
    name: str
    kind: str  # "base" or "propagation"
    fn: RuleFn

    def apply(self, view: _View, candidates: frozenset, marked: frozenset) -> set[int]:
        return self.fn(view, candidates, marked)


def _r_obj_of_opinion_verb(v: _View, cand, marked):
    # direct object of a lexicon word: "I love this laptop" -> laptop
    return {d for h, d, rel in v.arcs if rel == "obj" and d in cand and v.opinion[h]}


def _r_predicative(v: _View, cand, marked):
    # subject of a predicated opinion word, in both parse styles:
    # copular head parse (nsubj and acomp share a governor) and
    # adjectival head parse (opinion adjective governs nsubj, with cop child)
    out = set()
    for h, d, rel in v.arcs:
        if rel != "nsubj" or d not in cand:
            continue
        if any(v.opinion[a] for a in v.deps(h, "acomp")):
            out.add(d)
        if v.opinion[h] and (v.upos[h] == "ADJ" or v.has_dep(h, "cop")):
            out.add(d)
    return out


def _r_conjunction(v: _View, cand, marked):
    out = set()
    for h, d, rel in v.arcs:
        if rel in ("conj", "cc"):
            if h in marked and d in cand:
                out.add(d)
            if d in marked and h in cand:
                out.add(h)
    return out


def _r_compound(v: _View, cand, marked):
    out = set()
    for h, d, rel in v.arcs:
        if rel == "compound":
            if h in marked and d in cand:
                out.add(d)
            if d in marked and h in cand:
                out.add(h)
    return out


def _r_attributive_adj(v: _View, cand, marked):
    # opinion adjective directly modifying the noun: "a beautiful display"
    return {h for h, d, rel in v.arcs if rel == "amod" and h in cand and v.opinion[d]}


def _r_adverb_chain(v: _View, cand, marked):
    # opinion adverb on the noun itself, or on the adjective/verb governing it
    out = set()
    for h, d, rel in v.arcs:
        if rel != "advmod" or not v.opinion[d]:
            continue
        if h in cand:
            out.add(h)
        for n, r in v.deps_of.get(h, []):
            if r in ("nsubj", "obj", "iobj") and n in cand:
                out.add(n)
    return out


def _r_subject_of_opinion_verb(v: _View, cand, marked):
    return {
        d for h, d, rel in v.arcs
        if rel == "nsubj" and d in cand and v.opinion[h] and v.upos[h] == "VERB"
    }


def _r_xcomp_object(v: _View, cand, marked):
    # embedded opinion predicate over the matrix object: "I find the screen amazing"
    out = set()
    for h, d, rel in v.arcs:
        if rel == "xcomp" and v.opinion[d]:
            for n, r in v.deps_of.get(h, []):
                if r in ("obj", "iobj") and n in cand:
                    out.add(n)
    return out


def _r_nominal_of(v: _View, cand, marked):
    # "the quality of the screen": nmod dependent of a marked aspect
    return {d for h, d, rel in v.arcs if rel == "nmod" and h in marked and d in cand}


def _r_apposition(v: _View, cand, marked):
    out = set()
    for h, d, rel in v.arcs:
        if rel == "appos":
            if h in marked and d in cand:
                out.add(d)
            if d in marked and h in cand:
                out.add(h)
    return out


def _r_conjoined_adj(v: _View, cand, marked):
    # an adjective conjoined with an opinion adjective acts as an opinion word
    borrowed = set()
    for h, d, rel in v.arcs:
        if rel == "conj" and v.upos[h] == "ADJ" and v.upos[d] == "ADJ":
            if v.opinion[h] and not v.opinion[d]:
                borrowed.add(d)
            if v.opinion[d] and not v.opinion[h]:
                borrowed.add(h)
    out = set()
    for h, d, rel in v.arcs:
        if rel == "amod" and h in cand and d in borrowed:
            out.add(h)
        if rel == "nsubj" and d in cand and h in borrowed:
            out.add(d)
        if rel == "acomp" and d in borrowed:
            for n in v.deps(h, "nsubj"):
                if n in cand:
                    out.add(n)
    return out


def _r_dative_of_opinion_verb(v: _View, cand, marked):
    return {d for h, d, rel in v.arcs if rel == "iobj" and d in cand and v.opinion[h]}


_ALL_RULES = [
    SyntacticRule("obj_of_opinion_verb", "base", _r_obj_of_opinion_verb),
    SyntacticRule("predicative", "base", _r_predicative),
    SyntacticRule("conjunction", "propagation", _r_conjunction),
    SyntacticRule("compound", "propagation", _r_compound),
    SyntacticRule("attributive_adj", "base", _r_attributive_adj),
    SyntacticRule("adverb_chain", "base", _r_adverb_chain),
    SyntacticRule("subject_of_opinion_verb", "base", _r_subject_of_opinion_verb),
    SyntacticRule("xcomp_object", "base", _r_xcomp_object),
    SyntacticRule("nominal_of", "propagation", _r_nominal_of),
    SyntacticRule("apposition", "propagation", _r_apposition),
    SyntacticRule("conjoined_adj", "base", _r_conjoined_adj),
    SyntacticRule("dative_of_opinion_verb", "base", _r_dative_of_opinion_verb),
]


def default_rules() -> list[SyntacticRule]:
    """The full 12-rule set, in application order."""
    return list(_ALL_RULES)


def rules_by_name(names: Iterable[str]) -> list[SyntacticRule]:
    by_name = {r.name: r for r in _ALL_RULES}
    out = []
    for name in names:
        if name not in by_name:
            raise KeyError(f"unknown rule {name!r}; known: {sorted(by_name)}")
        out.append(by_name[name])
    return out


def build_noun_counts(corpus: Iterable[Sentence]) -> Counter:
    """Occurrence counts of NOUN/PROPN tokens, keyed by lowercased lemma."""
    counts: Counter = Counter()
    for sent in corpus:
        for tok in sent.tokens:
            if tok.upos in NOUN_TAGS:
                counts[tok.lemma.lower()] += 1
    return counts


def candidate_tokens(sentence: Sentence, cfg: LabelerConfig, counts: Counter) -> frozenset[int]:
    """0-based positions eligible to be marked as aspect terms."""
    cand = set()
    for pos, tok in enumerate(sentence.tokens):
        if tok.upos not in NOUN_TAGS:
            continue
        n = counts.get(tok.lemma.lower(), 0)
        ok = n >= cfg.min_support if cfg.support_direction == "at_least" else n < cfg.min_support
        if ok:
            cand.add(pos)
    if cfg.candidate_mode == "nouns_and_phrases":
        # compound-linked tokens join the candidate set, transitively
        links: list[tuple[int, int]] = []
        for pos, tok in enumerate(sentence.tokens):
            if tok.head > 0 and normalize_deprel(tok.deprel) == "compound":
                links.append((tok.head - 1, pos))
        changed = True
        while changed:
            changed = False
            for a, b in links:
                if (a in cand) != (b in cand):
                    cand.update((a, b))
                    changed = True
    return frozenset(cand)


def apply_rules(
    sentence: Sentence,
    rules: Sequence[SyntacticRule],
    lexicon: SentimentLexicon,
    candidates: frozenset[int],
    max_rounds: int | None = None,
) -> frozenset[int]:
    """Marked token positions: one pass of base rules, then propagation rules
    iterated to fixpoint (bounded by ``max_rounds``, default sentence length)."""
    view = _View(sentence, lexicon)
    base = [r for r in rules if r.kind == "base"]
    prop = [r for r in rules if r.kind == "propagation"]
    marked: set[int] = set()
    for rule in base:
        marked |= rule.apply(view, candidates, frozenset(marked))
    rounds = max_rounds if max_rounds is not None else len(sentence.tokens)
    for _ in range(rounds):
        frozen = frozenset(marked)
        new: set[int] = set()
        for rule in prop:
            new |= rule.apply(view, candidates, frozen)
        new -= marked
        if not new:
            break
        marked |= new
    return frozenset(marked)


@dataclass(frozen=True)
class LabeledSentence:
    sentence: Sentence
    tags: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "tags", tuple(self.tags))
        if len(self.tags) != len(self.sentence.tokens):
            raise ValueError(f"{len(self.tags)} tags for {len(self.sentence.tokens)} tokens")
        prev = "O"
        for tag in self.tags:
            if tag not in ("B", "I", "O"):
                raise ValueError(f"invalid IOB tag {tag!r}")
            if tag == "I" and prev == "O":
                raise ValueError("I tag not preceded by B or I")
            prev = tag

    @property
    def tokens(self) -> tuple[Token, ...]:
        return self.sentence.tokens

    @property
    def forms(self) -> list[str]:
        return self.sentence.forms


def assign_iob(sentence: Sentence, marked: frozenset[int]) -> LabeledSentence:
    """Maximal runs of consecutive marked positions become one B I* span."""
    tags = []
    for pos in range(len(sentence.tokens)):
        if pos not in marked:
            tags.append("O")
        elif pos - 1 in marked:
            tags.append("I")
        else:
            tags.append("B")
    return LabeledSentence(sentence=sentence, tags=tuple(tags))


def label_corpus(
    selected: Sequence[Sentence],
    cfg: LabelerConfig,
    rules: Sequence[SyntacticRule],
    lexicon: SentimentLexicon,
) -> list[LabeledSentence]:
    """Label every selected sentence; noun support counts come from the
    selected corpus itself."""
    counts = build_noun_counts(selected)
    out = []
    for sent in selected:
        cand = candidate_tokens(sent, cfg, counts)
        marked = apply_rules(sent, rules, lexicon, cand, cfg.max_propagation_rounds)
        out.append(assign_iob(sent, marked))
    return out


# ---------------------------------------------------------------------------
# ALD file format: FORM <TAB> UPOS <TAB> TAG, blank-line separated, with
# review_id / sent_index comments preserved.
# ---------------------------------------------------------------------------


def write_ald(labeled: Iterable[LabeledSentence], out: TextIO) -> None:
    for ls in labeled:
        out.write(f"# review_id = {ls.sentence.review_id}\n")
        out.write(f"# sent_index = {ls.sentence.sent_index}\n")
        for tok, tag in zip(ls.sentence.tokens, ls.tags):
            out.write(f"{tok.form}\t{tok.upos}\t{tag}\n")
        out.write("\n")


def read_tagged(path) -> list[tuple[dict[str, str], list[tuple[str, str, str]]]]:
    """Raw chunk-format reader: (metadata, [(form, upos, tag), ...]) per
    sentence, with no IOB validation (evaluation is lenient about stray I)."""
    sentences = []
    meta: dict[str, str] = {}
    rows: list[tuple[str, str, str]] = []
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                if rows:
                    sentences.append((meta, rows))
                meta, rows = {}, []
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, value = body.split("=", 1)
                    meta[key.strip()] = value.strip()
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}: line {lineno}: expected FORM<TAB>UPOS<TAB>TAG")
            rows.append((parts[0], parts[1], parts[2]))
    if rows:
        sentences.append((meta, rows))
    return sentences


def read_ald(path) -> list[LabeledSentence]:
    """Read a labelled dataset back; sentences carry a stub dependency tree
    (the chunk format stores no arcs) sufficient for feature extraction."""
    out = []
    for meta, rows in read_tagged(path):
        tokens = tuple(
            Token(index=i + 1, form=form, lemma=form.lower(), upos=upos,
                  head=0 if i == 0 else 1, deprel="root" if i == 0 else "dep")
            for i, (form, upos, _) in enumerate(rows)
        )
        sent = Sentence(tokens=tokens, review_id=meta.get("review_id", ""),
                        sent_index=int(meta.get("sent_index", 0)))
        out.append(LabeledSentence(sentence=sent, tags=tuple(tag for _, _, tag in rows)))
    return out
