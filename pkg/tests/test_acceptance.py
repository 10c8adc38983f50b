"""Acceptance gate: one test per stated criterion, each printing a
pass/fail line and enforcing its accuracy tolerance and time budget.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines.
"""

import itertools
import math
import os
import statistics
import time

import numpy as np
import pytest

from atekit import attention, baselines, metrics, rules, selection, tagger
from atekit.cli import main as cli_main
from atekit.corpus import Review, Sentence, Token
from synthgen import pipeline_f1, synth_lexicon, synth_reviews, write_fixture


class criterion:
    """Prints '<id> <summary>: PASS|FAIL (elapsed)' and enforces a time cap."""

    def __init__(self, cid, summary, budget_s):
        self.cid, self.summary, self.budget = cid, summary, budget_s

    def __enter__(self):
        self.t0 = time.time()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.time() - self.t0
        verdict = "PASS" if exc_type is None and elapsed < self.budget else "FAIL"
        print(f"{self.cid} {self.summary}: {verdict} ({elapsed:.2f}s)", flush=True)
        if exc_type is None:
            assert elapsed < self.budget, (
                f"{self.cid} exceeded its {self.budget}s budget ({elapsed:.2f}s)")
        return False


def random_review_matrix(rng, cfg, n_real=None):
    if n_real is None:
        n_real = int(rng.integers(1, cfg.n_max + 1))
    mat = np.zeros((cfg.n_max, cfg.d))
    mat[:n_real] = rng.normal(size=(n_real, cfg.d))
    mask = np.zeros(cfg.n_max, dtype=bool)
    mask[:n_real] = True
    return attention.ReviewMatrix(s_prime=mat, pad_mask=mask)


def test_p1_attention_gradients():
    cfg = attention.ModelConfig(d=8, r=2, d_a=5, h=6, n_max=4, seed=0)
    rng = np.random.default_rng(101)
    eps = 1e-5
    with criterion("P1", "analytic gradients match finite differences", 10.0):
        worst = 0.0
        for _ in range(10):
            params, head = attention.init_model(cfg, rng)
            batch = [(random_review_matrix(rng, cfg), int(rng.integers(1, 6)))]
            _, grads = attention.loss_and_gradients(batch, params, head)
            tensors = {"w_a1": params.w_a1, "w_a2": params.w_a2, "w_h": head.w_h,
                       "b_h": head.b_h, "w_o": head.w_o, "b_o": head.b_o}
            for name, tensor in tensors.items():
                flat = tensor.reshape(-1)
                grad_flat = grads[name].reshape(-1)
                for k in range(flat.size):
                    orig = flat[k]
                    flat[k] = orig + eps
                    up, _ = attention.loss_and_gradients(batch, params, head)
                    flat[k] = orig - eps
                    down, _ = attention.loss_and_gradients(batch, params, head)
                    flat[k] = orig
                    numeric = (up - down) / (2 * eps)
                    rel = abs(grad_flat[k] - numeric) / max(1.0, abs(grad_flat[k]), abs(numeric))
                    worst = max(worst, rel)
        assert worst < 1e-4, f"worst relative gradient error {worst}"


def test_p2_attention_contracts():
    cfg = attention.ModelConfig(d=8, r=3, d_a=5, h=6, n_max=6, seed=0)
    rng = np.random.default_rng(202)
    with criterion("P2", "attention rows stochastic, pads zero, order-free", 10.0):
        params, head = attention.init_model(cfg, rng)
        for _ in range(1000):
            rm = random_review_matrix(rng, cfg)
            A = attention.attention_matrix(rm, params)
            assert np.all(np.abs(A.sum(axis=1) - 1.0) <= 1e-6)
            assert not A[:, ~rm.pad_mask].any()
            n_real = int(rm.pad_mask.sum())
            perm = rng.permutation(n_real)
            shuffled = rm.s_prime.copy()
            shuffled[:n_real] = rm.s_prime[perm]
            rm2 = attention.ReviewMatrix(s_prime=shuffled, pad_mask=rm.pad_mask)
            M1 = attention.review_representation(A, rm)
            M2 = attention.review_representation(attention.attention_matrix(rm2, params), rm2)
            assert np.all(np.abs(M1 - M2) <= 1e-9)
            p1 = attention.predict_rating(M1, head)
            p2 = attention.predict_rating(M2, head)
            assert np.all(np.abs(p1 - p2) <= 1e-9)


def test_p3_selection_contracts():
    ladder = (0.0, 0.5, 0.6, 0.7, 0.8, 0.99)
    rng = np.random.default_rng(303)
    with criterion("P3", "min-max endpoints exact, selection monotone", 5.0):
        for _ in range(1000):
            n = int(rng.integers(1, 11))
            raw = rng.normal(size=n) * rng.uniform(0.1, 50)
            x = selection.normalize_minmax(raw)
            assert x.max() == 1.0
            assert x.min() == (1.0 if np.all(raw == raw[0]) else 0.0)
            sentences = tuple(
                Sentence(tokens=(Token(1, "w", "w", "NOUN", 0, "root"),),
                         review_id="r", sent_index=i)
                for i in range(n)
            )
            review = Review(review_id="r", stars=3, sentences=sentences)
            kept = {
                th: {s.sent_index for s in selection.select(review, x, selection.SelectionConfig(th))}
                for th in ladder
            }
            for low, high in itertools.combinations(ladder, 2):
                assert kept[high] <= kept[low]
        assert selection.normalize_minmax(np.array([2.0, 2.0])).tolist() == [1.0, 1.0]


FIDELITY_LEXICON = rules.SentimentLexicon(
    {"love": 0.9, "amazing": 0.9, "awful": -0.9, "superb": 0.9})


def fidelity_sentences():
    def s(rows, idx):
        tokens = tuple(
            Token(i + 1, form, form.lower(), upos, head, rel)
            for i, (form, upos, head, rel) in enumerate(rows)
        )
        return Sentence(tokens=tokens, review_id="fidelity", sent_index=idx)

    return [
        s([("I", "PRON", 2, "nsubj"), ("love", "VERB", 0, "root"),
           ("this", "DET", 4, "det"), ("laptop", "NOUN", 2, "obj")], 0),
        s([("The", "DET", 2, "det"), ("GPU", "NOUN", 4, "nsubj"),
           ("is", "AUX", 4, "cop"), ("amazing", "ADJ", 0, "root")], 1),
        s([("Keyboard", "NOUN", 5, "nsubj"), ("and", "CCONJ", 3, "cc"),
           ("sound", "NOUN", 1, "conj"), ("are", "AUX", 5, "cop"),
           ("awful", "ADJ", 0, "root")], 2),
        s([("The", "DET", 3, "det"), ("retina", "NOUN", 3, "compound"),
           ("display", "NOUN", 5, "nsubj"), ("is", "AUX", 5, "cop"),
           ("superb", "ADJ", 0, "root")], 3),
    ]


def test_p4_rule_fidelity():
    with criterion("P4", "reference sentences labelled exactly", 5.0):
        sentences = fidelity_sentences()
        labeled = rules.label_corpus(sentences, rules.LabelerConfig(min_support=1),
                                     rules.default_rules(), FIDELITY_LEXICON)
        extracted = []
        for ls in labeled:
            spans = sorted(metrics.extract_spans(ls.tags), key=lambda sp: sp.start)
            extracted.append([" ".join(ls.forms[sp.start:sp.end + 1]) for sp in spans])
        assert extracted[0] == ["laptop"]
        assert extracted[1] == ["GPU"]
        assert extracted[2] == ["Keyboard", "sound"]
        assert extracted[3] == ["retina display"]
        assert labeled[3].tags == ("O", "B", "I", "O", "O")


def brute_spans(tags):
    spans, i = [], 0
    while i < len(tags):
        if tags[i] == "O":
            i += 1
            continue
        start = i
        i += 1
        while i < len(tags) and tags[i] == "I":
            i += 1
        spans.append((start, i - 1))
    return spans


def test_p5_span_scoring_oracle():
    rng = np.random.default_rng(505)
    alphabet = np.array(["B", "I", "O"])
    with criterion("P5", "span scores equal brute-force matching", 10.0):
        for _ in range(10000):
            n = int(rng.integers(1, 9))
            pred_tags = list(alphabet[rng.integers(0, 3, size=n)])
            gold_tags = list(alphabet[rng.integers(0, 3, size=n)])
            pred = set(brute_spans(pred_tags))
            gold = set(brute_spans(gold_tags))
            m = len(pred & gold)
            p = m / len(pred) if pred else 0.0
            r = m / len(gold) if gold else 0.0
            f = 2 * p * r / (p + r) if p + r else 0.0
            got = metrics.prf(metrics.extract_spans(pred_tags, key=0),
                              metrics.extract_spans(gold_tags, key=0))
            assert (got.precision, got.recall, got.f1) == (p, r, f)
        gold = {metrics.Span("s", i, i) for i in range(5)}
        pred = {metrics.Span("s", 0, 0), metrics.Span("s", 1, 1),
                metrics.Span("s", 90, 90), metrics.Span("s", 91, 91)}
        scored = metrics.prf(pred, gold)
        assert (scored.precision, scored.recall) == (0.5, 0.4)
        assert abs(scored.f1 - 4.0 / 9.0) <= 1e-9


def enumerate_best(em, tr):
    n = em.shape[0]
    best_path, best_score = None, -np.inf
    for states in itertools.product(range(3), repeat=n):
        score = em[0, states[0]]
        for t in range(1, n):
            score += tr[states[t - 1], states[t]] + em[t, states[t]]
        if score > best_score:
            best_path, best_score = states, score
    return [tagger.TAGS[s] for s in best_path]


def test_p6_viterbi_oracle():
    rng = np.random.default_rng(606)
    with criterion("P6", "decoder equals exhaustive search incl. ties", 10.0):
        for _ in range(1000):
            n = int(rng.integers(1, 7))
            # half-integer scores keep float sums exact so ties are real ties
            em = rng.integers(-8, 9, size=(n, 3)) / 2.0
            tr = rng.integers(-8, 9, size=(3, 3)) / 2.0
            assert tagger.viterbi(em, tr) == enumerate_best(em, tr)
        zeros3 = np.zeros((3, 3))
        assert tagger.viterbi(np.zeros((4, 3)), zeros3) == ["B", "B", "B", "B"]
        em = np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]])
        assert tagger.viterbi(em, zeros3) == enumerate_best(em, zeros3) == ["B", "B"]


def test_p7_selection_beats_no_selection():
    with criterion("P7", "median F1 at 0.7 beats threshold 0 by 0.02", 300.0):
        gaps = []
        f0s, f7s = [], []
        for seed in (1, 2, 3, 4, 5):
            scores = pipeline_f1(seed, n_reviews=2000, n_test=400, thresholds=(0.0, 0.7))
            f0s.append(scores[0.0])
            f7s.append(scores[0.7])
            gaps.append(scores[0.7] - scores[0.0])
        median_f0 = statistics.median(f0s)
        median_f7 = statistics.median(f7s)
        print(f"  per-seed F1(0)   {[round(v, 4) for v in f0s]}")
        print(f"  per-seed F1(0.7) {[round(v, 4) for v in f7s]}")
        assert median_f7 >= median_f0 + 0.02, (
            f"median F1(0.7)={median_f7:.4f} vs median F1(0)={median_f0:.4f}")


def test_p8_baseline_containment_and_ordering():
    with criterion("P8", "arc baselines nest; full rules beat single arcs", 60.0):
        lexicon = synth_lexicon()
        sentences = [s for r in synth_reviews(808, 400) for s in r.real_sentences]
        for sent in sentences:
            narrow = baselines.predict_baseline(baselines.BaselineKind.ARC_ADJ, sent, lexicon)
            wide = baselines.predict_baseline(baselines.BaselineKind.ARC_ANY, sent, lexicon)
            narrow_marks = {i for i, t in enumerate(narrow.tags) if t != "O"}
            wide_marks = {i for i, t in enumerate(wide.tags) if t != "O"}
            assert narrow_marks <= wide_marks
        suite = baselines.run_baseline_suite(sentences, lexicon)
        assert suite["rules_full"].f1 >= suite["arc_any"].f1, (
            f"rules_full {suite['rules_full'].f1:.4f} < arc_any {suite['arc_any'].f1:.4f}")


def test_p9_end_to_end_determinism(tmp_path):
    with criterion("P9", "repeated seeded runs are byte-identical", 120.0):
        paths = write_fixture(tmp_path)
        outs = []
        for tag in ("first", "second"):
            out = os.path.join(tmp_path, tag)
            code = cli_main(["run-all", "--config", paths["config"],
                             "--seed", "7", "--out", out])
            assert code == 0
            outs.append(out)
        names = sorted(os.listdir(outs[0]))
        assert names == sorted(os.listdir(outs[1]))
        for name in names:
            with open(os.path.join(outs[0], name), "rb") as fa:
                a = fa.read()
            with open(os.path.join(outs[1], name), "rb") as fb:
                b = fb.read()
            assert a == b, f"artifact {name} differs between identical runs"


def test_p10_confidence_interval_fixed_points():
    with criterion("P10", "interval width 0 for constants, t(24) factor", 5.0):
        mean, half = metrics.confidence_interval([0.6180339887] * 25)
        assert mean == 0.6180339887 and half == 0.0
        values = list(np.random.default_rng(10).uniform(size=25))
        sd = statistics.stdev(values)
        _, half = metrics.confidence_interval(values)
        factor = half * math.sqrt(25) / sd
        assert abs(factor - 2.0638985616280205) <= 1e-6
