"""Bridge between raw review collections and the parsed-corpus pipeline."""

from .backends import BuiltinBackend, available_backends, get_backend
from .convert import ConvertReport, ParseReport, convert_semeval_xml, parse_reviews, read_semeval_xml
from .records import BridgeError, GoldDocument, GoldSentence, GoldTerm, RawReview
from .vectors import ExportReport, export_sentence_vectors, read_corpus_forms

__version__ = "0.1.0"

__all__ = [
    "BridgeError",
    "RawReview",
    "GoldTerm",
    "GoldSentence",
    "GoldDocument",
    "BuiltinBackend",
    "get_backend",
    "available_backends",
    "ParseReport",
    "ConvertReport",
    "parse_reviews",
    "read_semeval_xml",
    "convert_semeval_xml",
    "ExportReport",
    "read_corpus_forms",
    "export_sentence_vectors",
]
