"""Trainable IOB sequence labelers over an automatically labelled dataset.

Two model families share one hand-built feature template (token-window
identities, affixes, shape flags):

* a per-token linear classifier trained with one-vs-rest hinge loss, and
* a linear-chain CRF trained as an averaged structured perceptron and
  decoded with Viterbi.

Tag indices are fixed: B=0, I=1, O=2.  Viterbi ties resolve to the
lexicographically smallest tag sequence under B < I < O; per-token argmax
ties resolve to O (so an untrained model predicts all O).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Sentence
from .metrics import extract_spans, prf
from .rules import LabeledSentence

__all__ = [
    "TAGS",
    "TrainConfig",
    "FeatureVocab",
    "LinearTaggerModel",
    "CrfModel",
    "extract_features",
    "viterbi",
    "train_linear",
    "train_crf_perceptron",
    "predict_tags",
    "save_model",
    "load_model",
]

TAGS = ("B", "I", "O")
_TAG_INDEX = {t: i for i, t in enumerate(TAGS)}
_B, _I, _O = 0, 1, 2

_LINEAR_MAGIC = "atekit-linear-tagger-v1"
_CRF_MAGIC = "atekit-crf-tagger-v1"


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 32
    max_epochs: int = 20
    patience: int = 5
    l2: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be positive")
        if self.l2 < 0:
            raise ValueError("l2 must be nonnegative")
        if not 0 <= self.patience <= self.max_epochs:
            raise ValueError("patience must be in [0, max_epochs]")


def extract_features(sentence, i: int) -> tuple[str, ...]:
    """Feature strings for token i: a 5-token identity window padded with
    the _s_/_e_ sentinels, prefixes and suffixes of the token up to length 4,
    and shape flags emitted only when true."""
    forms = sentence.forms if hasattr(sentence, "forms") else list(sentence)
    if not 0 <= i < len(forms):
        raise IndexError(f"token index {i} out of range for length {len(forms)}")
    feats = []
    for off in (-2, -1, 0, 1, 2):
        j = i + off
        if j < 0:
            val = "_s_"
        elif j >= len(forms):
            val = "_e_"
        else:
            val = forms[j]
        feats.append(f"w[{off:+d}]={val}")
    form = forms[i]
    for k in range(1, min(4, len(form)) + 1):
        feats.append(f"pre[{k}]={form[:k]}")
    for k in range(1, min(4, len(form)) + 1):
        feats.append(f"suf[{k}]={form[-k:]}")
    if form[:1].isupper():
        feats.append("shape=cap")
    if form.isdigit():
        feats.append("shape=num")
    if not form.isalnum():
        feats.append("shape=nonalnum")
    return tuple(feats)


class FeatureVocab:
    """String-to-id table; grows while unfrozen, unknowns drop once frozen."""

    def __init__(self, features: Sequence[str] = ()):
        self.index: dict[str, int] = {}
        for f in features:
            if f in self.index:
                raise ValueError(f"duplicate feature {f!r}")
            self.index[f] = len(self.index)
        self.frozen = False

    def __len__(self) -> int:
        return len(self.index)

    def add(self, feats: Sequence[str]) -> list[int]:
        if self.frozen:
            raise RuntimeError("vocabulary is frozen")
        ids = []
        for f in feats:
            if f not in self.index:
                self.index[f] = len(self.index)
            ids.append(self.index[f])
        return ids

    def ids(self, feats: Sequence[str]) -> list[int]:
        return [self.index[f] for f in feats if f in self.index]


def _argmax_tag(scores) -> int:
    # O wins exact ties, then B, then I
    best = _O
    m = scores[_O]
    for c in (_B, _I):
        if scores[c] > m:
            best, m = c, scores[c]
    return best


def _repair_iob(tags: list[str]) -> list[str]:
    out = []
    prev = "O"
    for tag in tags:
        if tag == "I" and prev == "O":
            tag = "B"
        out.append(tag)
        prev = tag
    return out


def viterbi(emissions: np.ndarray, transitions: np.ndarray) -> list[str]:
    """Highest-scoring tag path under sum of per-position emissions plus
    between-position transitions; among ties, the lexicographically smallest
    sequence under B < I < O.

    The lexicographic guarantee needs suffix-optimal scores, so the DP runs
    backward and the path is rebuilt front to first choosing the smallest
    tag index that attains the optimum.
    """
    em = np.asarray(emissions, dtype=float)
    tr = np.asarray(transitions, dtype=float)
    if em.ndim != 2 or em.shape[1] != 3 or tr.shape != (3, 3):
        raise ValueError("emissions must be n x 3 and transitions 3 x 3")
    n = em.shape[0]
    if n == 0:
        raise ValueError("empty sequence")
    f = np.empty((n, 3))
    f[n - 1] = em[n - 1]
    for t in range(n - 2, -1, -1):
        for s in range(3):
            f[t, s] = em[t, s] + max(tr[s, s2] + f[t + 1, s2] for s2 in range(3))
    path = []
    best = max(f[0])
    state = min(s for s in range(3) if f[0, s] == best)
    path.append(state)
    for t in range(1, n):
        best = max(tr[state, s2] + f[t, s2] for s2 in range(3))
        state = min(s for s in range(3) if tr[state, s] + f[t, s] == best)
        path.append(state)
    return [TAGS[s] for s in path]


class LinearTaggerModel:
    def __init__(self, vocab: FeatureVocab, weights: np.ndarray):
        if weights.shape != (3, len(vocab)):
            raise ValueError("weights must be 3 x |vocab|")
        self.vocab = vocab
        self.weights = weights


class CrfModel:
    def __init__(
        self,
        vocab: FeatureVocab,
        emission: np.ndarray,
        transition: np.ndarray,
        block_o_to_i: bool = True,
    ):
        if emission.shape != (len(vocab), 3) or transition.shape != (3, 3):
            raise ValueError("emission must be |vocab| x 3 and transition 3 x 3")
        self.vocab = vocab
        self.emission = emission
        self.transition = transition
        self.block_o_to_i = block_o_to_i


def _sentence_feature_ids(vocab: FeatureVocab, ls: LabeledSentence, grow: bool) -> list[list[int]]:
    fn = vocab.add if grow else vocab.ids
    return [fn(extract_features(ls.sentence, i)) for i in range(len(ls.tokens))]


def _split_heldout(ald: Sequence[LabeledSentence], seed: int):
    """Deterministic ~10% holdout; tiny datasets validate in-sample."""
    if len(ald) < 20:
        return list(ald), list(ald)
    order = np.random.default_rng(seed ^ 0x5EED).permutation(len(ald))
    n_val = max(1, len(ald) // 10)
    val_idx = set(int(i) for i in order[:n_val])
    train = [ald[i] for i in range(len(ald)) if i not in val_idx]
    val = [ald[i] for i in sorted(val_idx)]
    return train, val


def _span_f1(model, sentences: Sequence[LabeledSentence]) -> float:
    pred_spans = set()
    gold_spans = set()
    for k, ls in enumerate(sentences):
        predicted = predict_tags(model, ls.sentence)
        key = (ls.sentence.review_id, ls.sentence.sent_index, k)
        pred_spans |= extract_spans(predicted.tags, key=key)
        gold_spans |= extract_spans(ls.tags, key=key)
    return prf(pred_spans, gold_spans).f1


def train_linear(
    ald: Sequence[LabeledSentence],
    cfg: TrainConfig,
    val: Sequence[LabeledSentence] | None = None,
) -> LinearTaggerModel:
    """One-vs-rest hinge-loss SGD with L2 decay, early-stopped on held-out
    span F1 (strict improvement resets the stall counter; training stops once
    the counter reaches the patience value)."""
    if not ald:
        raise ValueError("empty training dataset")
    if val is None:
        train, val = _split_heldout(ald, cfg.seed)
    else:
        train, val = list(ald), list(val)
    vocab = FeatureVocab()
    feat_ids = [_sentence_feature_ids(vocab, ls, grow=True) for ls in train]
    vocab.frozen = True
    tag_ids = [[_TAG_INDEX[t] for t in ls.tags] for ls in train]
    w = np.zeros((3, len(vocab)))
    model = LinearTaggerModel(vocab, w)
    rng = np.random.default_rng(cfg.seed)
    decay = 1.0 - cfg.learning_rate * cfg.l2
    best_f1 = -1.0
    best_w = w.copy()
    stale = 0
    for _epoch in range(cfg.max_epochs):
        order = rng.permutation(len(train))
        for start in range(0, len(order), cfg.batch_size):
            for si in order[start : start + cfg.batch_size]:
                for ids, gold in zip(feat_ids[si], tag_ids[si]):
                    if ids:
                        scores = w[:, ids].sum(axis=1)
                    else:
                        scores = np.zeros(3)
                    for c in range(3):
                        y = 1.0 if c == gold else -1.0
                        if y * scores[c] < 1.0:
                            w[c, ids] += cfg.learning_rate * y
            if cfg.l2 > 0:
                w *= decay
        f1 = _span_f1(model, val)
        if f1 > best_f1:
            best_f1 = f1
            best_w = w.copy()
            stale = 0
        else:
            stale += 1
        if stale >= cfg.patience:
            break
    model.weights[...] = best_w
    return model


def _crf_decode(
    ids_per_token: list[list[int]],
    emission: np.ndarray,
    transition: np.ndarray,
    block_o_to_i: bool,
) -> list[str]:
    n = len(ids_per_token)
    em = np.zeros((n, 3))
    for i, ids in enumerate(ids_per_token):
        if ids:
            em[i] = emission[ids].sum(axis=0)
    tr = transition.copy()
    # decode-time masks keep every path IOB-valid; stored weights stay finite
    em[0, _I] = -math.inf
    if block_o_to_i:
        tr[_O, _I] = -math.inf
    return viterbi(em, tr)


def train_crf_perceptron(
    ald: Sequence[LabeledSentence],
    cfg: TrainConfig,
    val: Sequence[LabeledSentence] | None = None,
    average: bool = True,
    block_o_to_i: bool = True,
) -> CrfModel:
    """Averaged structured perceptron: Viterbi-decode each sentence, push
    emission and transition weights toward gold and away from the prediction.
    The returned weights are the average of the per-step snapshots (the usual
    lagged-correction trick), which is what early stopping scores too."""
    if not ald:
        raise ValueError("empty training dataset")
    if val is None:
        train, val = _split_heldout(ald, cfg.seed)
    else:
        train, val = list(ald), list(val)
    vocab = FeatureVocab()
    feat_ids = [_sentence_feature_ids(vocab, ls, grow=True) for ls in train]
    vocab.frozen = True
    gold_tags = [list(ls.tags) for ls in train]
    e_w = np.zeros((len(vocab), 3))
    t_w = np.zeros((3, 3))
    e_u = np.zeros_like(e_w)  # sum of (step - 1) * delta, for averaging
    t_u = np.zeros_like(t_w)
    rng = np.random.default_rng(cfg.seed)
    step = 0
    best_f1 = -1.0
    best: tuple[np.ndarray, np.ndarray] | None = None
    stale = 0

    def averaged() -> tuple[np.ndarray, np.ndarray]:
        if not average or step == 0:
            return e_w.copy(), t_w.copy()
        return e_w - e_u / step, t_w - t_u / step

    for _epoch in range(cfg.max_epochs):
        order = rng.permutation(len(train))
        for si in order:
            step += 1
            ids_seq = feat_ids[si]
            gold = gold_tags[si]
            pred = _crf_decode(ids_seq, e_w, t_w, block_o_to_i)
            if pred == gold:
                continue
            for ids, g, p in zip(ids_seq, gold, pred):
                gi, pi = _TAG_INDEX[g], _TAG_INDEX[p]
                if gi == pi or not ids:
                    continue
                e_w[ids, gi] += 1.0
                e_w[ids, pi] -= 1.0
                e_u[ids, gi] += step - 1
                e_u[ids, pi] -= step - 1
            for k in range(len(gold) - 1):
                gp = (_TAG_INDEX[gold[k]], _TAG_INDEX[gold[k + 1]])
                pp = (_TAG_INDEX[pred[k]], _TAG_INDEX[pred[k + 1]])
                if gp == pp:
                    continue
                t_w[gp] += 1.0
                t_w[pp] -= 1.0
                t_u[gp] += step - 1
                t_u[pp] -= step - 1
        e_snap, t_snap = averaged()
        snapshot = CrfModel(vocab, e_snap, t_snap, block_o_to_i)
        f1 = _span_f1(snapshot, val)
        if f1 > best_f1:
            best_f1 = f1
            best = (e_snap, t_snap)
            stale = 0
        else:
            stale += 1
        if stale >= cfg.patience:
            break
    if best is None:  # patience 0 with no epochs is excluded by config
        best = averaged()
    return CrfModel(vocab, best[0], best[1], block_o_to_i)


def predict_tags(model, sentence: Sentence) -> LabeledSentence:
    """Tag one sentence; unseen features score zero.  Linear predictions get
    IOB repair (stray I becomes B); CRF decoding is valid by construction."""
    n = len(sentence.tokens)
    ids_per_token = [model.vocab.ids(extract_features(sentence, i)) for i in range(n)]
    if isinstance(model, LinearTaggerModel):
        tags = []
        for ids in ids_per_token:
            scores = model.weights[:, ids].sum(axis=1) if ids else np.zeros(3)
            tags.append(TAGS[_argmax_tag(scores)])
        tags = _repair_iob(tags)
    elif isinstance(model, CrfModel):
        tags = _crf_decode(ids_per_token, model.emission, model.transition, model.block_o_to_i)
    else:
        raise TypeError(f"unknown model type {type(model).__name__}")
    return LabeledSentence(sentence=sentence, tags=tuple(tags))


def save_model(model, path) -> None:
    """Versioned JSON container; features are stored sorted with weights
    permuted to match, so equal models serialize byte-identically."""
    feats = sorted(model.vocab.index, key=lambda f: (f, model.vocab.index[f]))
    perm = [model.vocab.index[f] for f in feats]
    if isinstance(model, LinearTaggerModel):
        payload = {
            "format": _LINEAR_MAGIC,
            "classes": list(TAGS),
            "features": feats,
            "weights": model.weights[:, perm].tolist(),
        }
    elif isinstance(model, CrfModel):
        payload = {
            "format": _CRF_MAGIC,
            "classes": list(TAGS),
            "features": feats,
            "emission": model.emission[perm, :].tolist(),
            "transition": model.transition.tolist(),
            "block_o_to_i": model.block_o_to_i,
        }
    else:
        raise TypeError(f"unknown model type {type(model).__name__}")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True)
        f.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    magic = payload.get("format")
    if magic not in (_LINEAR_MAGIC, _CRF_MAGIC):
        raise ValueError(f"{path}: unrecognized model format {magic!r}")
    vocab = FeatureVocab(payload["features"])
    vocab.frozen = True
    if magic == _LINEAR_MAGIC:
        return LinearTaggerModel(vocab, np.array(payload["weights"], dtype=float).reshape(3, len(vocab)))
    emission = np.array(payload["emission"], dtype=float).reshape(len(vocab), 3)
    transition = np.array(payload["transition"], dtype=float)
    return CrfModel(vocab, emission, transition, bool(payload["block_o_to_i"]))
