"""Sentence-vector export.

Reads a corpus interchange file back (comments plus the FORM column are
enough), embeds every sentence with the backend, and writes the JSON-lines
vector format: one ``{"review_id", "sent_index", "vector"}`` object per line.
That format has no comment syntax, so backend provenance rides in an extra
``"backend"`` key per record, which downstream loaders ignore.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .backends import Backend
from .records import BridgeError

__all__ = ["ExportReport", "read_corpus_forms", "export_sentence_vectors"]


@dataclass
class ExportReport:
    count: int
    dimension: int


def read_corpus_forms(path) -> list[tuple[str, int, list[str]]]:
    """(review_id, sent_index, forms) for every sentence block, in file order."""
    out: list[tuple[str, int, list[str]]] = []
    seen: set[tuple[str, int]] = set()
    meta: dict[str, str] = {}
    forms: list[str] = []

    def flush(lineno: int) -> None:
        if not forms and not meta:
            return
        if "review_id" not in meta or "sent_index" not in meta:
            raise BridgeError(f"{path}: block before line {lineno} lacks review_id/sent_index")
        if not forms:
            raise BridgeError(f"{path}: block before line {lineno} has no tokens")
        try:
            sent_index = int(meta["sent_index"])
        except ValueError:
            raise BridgeError(f"{path}: non-integer sent_index {meta['sent_index']!r}") from None
        key = (meta["review_id"], sent_index)
        if key in seen:
            raise BridgeError(f"{path}: duplicate sentence key {key}")
        seen.add(key)
        out.append((key[0], key[1], list(forms)))
        meta.clear()
        forms.clear()

    with open(path, encoding="utf-8") as f:
        lineno = 0
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                flush(lineno)
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, value = body.split("=", 1)
                    meta.setdefault(key.strip(), value.strip())
                continue
            cols = line.split("\t")
            if len(cols) != 10:
                raise BridgeError(f"{path}: line {lineno}: expected 10 columns, got {len(cols)}")
            forms.append(cols[1])
        flush(lineno + 1)
    if not out:
        raise BridgeError(f"{path}: no sentence blocks found")
    return out


def export_sentence_vectors(corpus_path, backend: Backend, out_path) -> ExportReport:
    """One vector line per corpus sentence, keyed exactly like the corpus."""
    blocks = read_corpus_forms(corpus_path)
    provenance = f"{backend.name} {backend.version}"
    with open(out_path, "w", encoding="utf-8") as out:
        for review_id, sent_index, forms in blocks:
            vector = backend.embed(forms)
            if len(vector) != backend.dimension:
                raise BridgeError(
                    f"backend {backend.name} returned {len(vector)} dims, declared {backend.dimension}"
                )
            record = {"review_id": review_id, "sent_index": sent_index,
                      "backend": provenance, "vector": vector}
            out.write(json.dumps(record, sort_keys=True) + "\n")
    return ExportReport(count=len(blocks), dimension=backend.dimension)
