"""Converters producing the corpus interchange format.

Both converters write ten-column CoNLL-U blocks whose comment lines carry
``review_id``, ``stars``, and ``sent_index``; the first block additionally
carries a ``# parser = <name> <version>`` provenance comment.  Downstream
corpus readers ignore comment keys they do not know, so the provenance line
survives a full round trip.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import TextIO

from .backends import Backend, ParsedSentence, ParsedToken
from .records import BridgeError, GoldDocument, GoldSentence, GoldTerm, RawReview

__all__ = [
    "ParseReport",
    "ConvertReport",
    "parse_reviews",
    "read_semeval_xml",
    "convert_semeval_xml",
]


@dataclass
class ParseReport:
    reviews: int = 0
    sentences: int = 0
    skipped: int = 0
    messages: list[str] = field(default_factory=list)


@dataclass
class ConvertReport:
    sentences: int = 0
    terms: int = 0
    mismatches: int = 0
    messages: list[str] = field(default_factory=list)


def _write_block(
    out: TextIO,
    review_id: str,
    stars: int,
    sent_index: int,
    sentence: ParsedSentence,
    gold: list[str] | None = None,
    header: str | None = None,
) -> None:
    if header is not None:
        out.write(f"# parser = {header}\n")
    out.write(f"# review_id = {review_id}\n")
    out.write(f"# stars = {stars}\n")
    out.write(f"# sent_index = {sent_index}\n")
    for i, tok in enumerate(sentence.tokens):
        misc = "_" if gold is None else f"Gold={gold[i]}"
        out.write(
            f"{i + 1}\t{tok.form}\t{tok.lemma}\t{tok.upos}\t_\t_\t{tok.head}\t{tok.deprel}\t_\t{misc}\n"
        )
    out.write("\n")


def parse_reviews(in_path, backend: Backend, out_path) -> ParseReport:
    """Convert JSON-lines raw reviews into a parsed corpus file.

    Malformed records, duplicate review ids, and texts the backend cannot
    parse into at least one sentence are skipped; each skip is counted and
    described in the report.  A corpus with zero convertible records is an
    error rather than an empty file.
    """
    report = ParseReport()
    provenance = f"{backend.name} {backend.version}"
    seen_ids: set[str] = set()
    with open(in_path, encoding="utf-8") as src, open(out_path, "w", encoding="utf-8") as out:
        for lineno, line in enumerate(src, start=1):
            if not line.strip():
                continue
            try:
                review = RawReview.from_json_line(line)
            except BridgeError as exc:
                report.skipped += 1
                report.messages.append(f"line {lineno}: skipped: {exc}")
                continue
            if review.review_id in seen_ids:
                report.skipped += 1
                report.messages.append(
                    f"line {lineno}: skipped: duplicate review_id {review.review_id!r}"
                )
                continue
            sentences = backend.parse(review.text)
            if not sentences:
                report.skipped += 1
                report.messages.append(
                    f"line {lineno}: skipped: no parseable sentences in review {review.review_id!r}"
                )
                continue
            seen_ids.add(review.review_id)
            for sent_index, sentence in enumerate(sentences):
                header = provenance if report.sentences == 0 else None
                _write_block(out, review.review_id, review.stars, sent_index, sentence,
                             header=header)
                report.sentences += 1
            report.reviews += 1
    if report.reviews == 0:
        raise BridgeError(f"{in_path}: no convertible records ({report.skipped} skipped)")
    return report


def read_semeval_xml(path) -> GoldDocument:
    """Read SemEval-2014 ABSA XML into a validated gold document."""
    try:
        tree = ET.parse(path)
    except ET.ParseError as exc:
        raise BridgeError(f"{path}: malformed XML: {exc}") from None
    root = tree.getroot()
    sentences = []
    for node in root.iter("sentence"):
        sent_id = node.get("id", "")
        text_node = node.find("text")
        if text_node is None or text_node.text is None:
            raise BridgeError(f"{path}: sentence {sent_id!r} has no text element")
        terms = []
        for term_node in node.iter("aspectTerm"):
            try:
                start = int(term_node.get("from", ""))
                end = int(term_node.get("to", ""))
            except ValueError:
                raise BridgeError(
                    f"{path}: sentence {sent_id!r}: non-integer term offsets"
                ) from None
            terms.append(GoldTerm(term=term_node.get("term", ""), start=start, end=end))
        sentences.append(GoldSentence(sent_id=sent_id, text=text_node.text, terms=tuple(terms)))
    return GoldDocument(sentences=tuple(sentences))


def _project_terms(
    sentence: ParsedSentence, gold: GoldSentence, report: ConvertReport
) -> list[str]:
    """IOB tags for the minimal token runs covering each term's offsets."""
    tags = ["O"] * len(sentence.tokens)
    for term in gold.terms:
        covering = [
            i for i, tok in enumerate(sentence.tokens)
            if tok.start < term.end and tok.end > term.start
        ]
        if not covering:
            report.mismatches += 1
            report.messages.append(
                f"sentence {gold.sent_id!r}: term {term.term!r} covers no tokens"
            )
            continue
        run_start = sentence.tokens[covering[0]].start
        run_end = sentence.tokens[covering[-1]].end
        if run_start != term.start or run_end != term.end:
            report.mismatches += 1
            report.messages.append(
                f"sentence {gold.sent_id!r}: term {term.term!r} [{term.start}, {term.end}) "
                f"does not align with token run [{run_start}, {run_end})"
            )
        tags[covering[0]] = "B"
        for i in covering[1:]:
            tags[i] = "I"
    return tags


def _merge_sentences(parsed: list[ParsedSentence]) -> ParsedSentence:
    """Join sub-sentences into one tree: heads re-offset, later roots become
    parataxis children of the first root."""
    tokens: list[ParsedToken] = []
    first_root: int | None = None
    base = 0
    for sub in parsed:
        for tok in sub.tokens:
            if tok.head == 0:
                if first_root is None:
                    first_root = len(tokens) + 1
                    head, rel = 0, tok.deprel
                else:
                    head, rel = first_root, "parataxis"
            else:
                head, rel = tok.head + base, tok.deprel
            tokens.append(ParsedToken(form=tok.form, lemma=tok.lemma, upos=tok.upos,
                                      head=head, deprel=rel, start=tok.start, end=tok.end))
        base = len(tokens)
    return ParsedSentence(tokens=tuple(tokens))


# the interchange format requires a star rating; gold sentences have none, so
# every converted sentence carries this neutral placeholder
_GOLD_STARS = 3


def convert_semeval_xml(xml_path, backend: Backend, out_path) -> ConvertReport:
    """Convert SemEval-2014 ABSA XML into a gold-tagged corpus file.

    Each XML sentence becomes a one-sentence review keyed by its id.  Terms
    are projected onto the minimal covering token run and tagged B/I; every
    other token is tagged O explicitly.  Boundary mismatches are counted, not
    fatal.
    """
    document = read_semeval_xml(xml_path)
    if not document.sentences:
        raise BridgeError(f"{xml_path}: no sentences found")
    report = ConvertReport()
    provenance = f"{backend.name} {backend.version}"
    with open(out_path, "w", encoding="utf-8") as out:
        for gold in document.sentences:
            parsed = backend.parse(gold.text)
            # gold offsets address the whole text, so it must stay one unit
            sentence = parsed[0] if len(parsed) == 1 else _merge_sentences(parsed)
            if not sentence.tokens:
                raise BridgeError(f"{xml_path}: sentence {gold.sent_id!r} tokenized to nothing")
            tags = _project_terms(sentence, gold, report)
            header = provenance if report.sentences == 0 else None
            _write_block(out, gold.sent_id, _GOLD_STARS, 0, sentence, gold=tags, header=header)
            report.sentences += 1
            report.terms += len(gold.terms)
    return report
