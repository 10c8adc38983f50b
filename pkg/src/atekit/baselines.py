"""Reference extractors that skip sentence selection and frequency filtering.

All four run directly on a parsed corpus with a sentiment lexicon:

* ``arc_any``:    nouns with any single dependency arc to a lexicon word.
* ``arc_adj``:    as ``arc_any``, restricted to adjective lexicon words.
* ``rules_core``: predicative / conjunction / attributive / adverb rules only.
* ``rules_full``: the complete rule labeller.

Every NOUN/PROPN token is a candidate here, so baseline differences isolate
the effect of the extraction logic itself.
"""

from __future__ import annotations

from enum import Enum
from typing import Sequence

from .corpus import Sentence, gold_tags
from .metrics import PRF, extract_spans, prf
from .rules import (
    NOUN_TAGS,
    LabeledSentence,
    SentimentLexicon,
    SyntacticRule,
    apply_rules,
    assign_iob,
    default_rules,
)

__all__ = ["BaselineKind", "predict_baseline", "run_baseline_suite"]


class BaselineKind(Enum):
    ARC_ANY = "arc_any"
    ARC_ADJ = "arc_adj"
    RULES_CORE = "rules_core"
    RULES_FULL = "rules_full"


# the arc types the restricted variant keeps: attributive, adverbial,
# predicative, plus conjunction propagation
_CORE_RULE_NAMES = frozenset(
    {"attributive_adj", "adverb_chain", "predicative", "conjunction"}
)


def _all_noun_positions(sentence: Sentence) -> frozenset[int]:
    return frozenset(
        pos for pos, tok in enumerate(sentence.tokens) if tok.upos in NOUN_TAGS
    )


def _arc_marked(sentence: Sentence, lexicon: SentimentLexicon, adj_only: bool) -> frozenset[int]:
    opinion = [lexicon.contains(t) for t in sentence.tokens]
    if adj_only:
        opinion = [o and t.upos == "ADJ" for o, t in zip(opinion, sentence.tokens)]
    marked = set()
    for pos, tok in enumerate(sentence.tokens):
        if tok.upos not in NOUN_TAGS:
            continue
        # one arc in either direction counts; no transitive closure
        if tok.head > 0 and opinion[tok.head - 1]:
            marked.add(pos)
            continue
        for other_pos, other in enumerate(sentence.tokens):
            if other.head - 1 == pos and opinion[other_pos]:
                marked.add(pos)
                break
    return frozenset(marked)


def predict_baseline(
    kind: BaselineKind,
    sentence: Sentence,
    lexicon: SentimentLexicon,
    rules: Sequence[SyntacticRule] | None = None,
) -> LabeledSentence:
    """Pure function of the sentence, the lexicon, and (for the rule-driven
    kinds) the rule set; no counts, attention, or trained parameters."""
    if rules is None:
        rules = default_rules()
    candidates = _all_noun_positions(sentence)
    if kind is BaselineKind.ARC_ANY:
        marked = _arc_marked(sentence, lexicon, adj_only=False)
    elif kind is BaselineKind.ARC_ADJ:
        marked = _arc_marked(sentence, lexicon, adj_only=True)
    elif kind is BaselineKind.RULES_CORE:
        core = [r for r in rules if r.name in _CORE_RULE_NAMES]
        marked = apply_rules(sentence, core, lexicon, candidates)
    elif kind is BaselineKind.RULES_FULL:
        marked = apply_rules(sentence, rules, lexicon, candidates)
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unknown baseline {kind!r}")
    return assign_iob(sentence, marked)


def run_baseline_suite(
    test_corpus: Sequence[Sentence],
    lexicon: SentimentLexicon,
    rules: Sequence[SyntacticRule] | None = None,
) -> dict[str, PRF]:
    """Exact-span scores for every baseline against gold tags carried in the
    corpus; raises if any sentence lacks gold annotation."""
    gold_pairs: list[tuple[Sentence, list[str]]] = []
    for sent in test_corpus:
        tags = gold_tags(sent)
        if tags is None:
            raise ValueError(f"sentence {sent.key} has no gold tags")
        gold_pairs.append((sent, tags))
    results: dict[str, PRF] = {}
    for kind in BaselineKind:
        pred_spans = set()
        gold_spans = set()
        for sent, gold in gold_pairs:
            labeled = predict_baseline(kind, sent, lexicon, rules)
            pred_spans |= extract_spans(labeled.tags, key=sent.key)
            gold_spans |= extract_spans(gold, key=sent.key)
        results[kind.value] = prf(pred_spans, gold_spans)
    return results
