"""Weak-label dataset construction and sequence taggers for aspect term extraction.

The pipeline turns a dependency-parsed review corpus into training data for
aspect term extraction: an attention-based rating predictor scores sentences,
low-scoring sentences are dropped, a dependency-rule labeler tags the rest in
IOB format, and linear/CRF taggers are trained and evaluated with exact-span
CoNLL metrics.
"""

__version__ = "0.1.0"
