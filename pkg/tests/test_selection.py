"""Attention hop-summing, min-max rescaling, and threshold selection."""

import io

import numpy as np
import pytest

from atekit.corpus import Review, Sentence, Token
from atekit.selection import (
    SelectionConfig,
    SentenceScore,
    hop_sum,
    normalize_minmax,
    read_scores,
    select,
    write_scores,
)

THRESHOLDS = (0.0, 0.5, 0.6, 0.7, 0.8, 0.99)


def review_with(n):
    sentences = tuple(
        Sentence(tokens=(Token(1, "w", "w", "NOUN", 0, "root"),),
                 review_id="r", sent_index=i)
        for i in range(n)
    )
    return Review(review_id="r", stars=3, sentences=sentences)


class TestHopSum:
    def test_sums_hops_per_real_sentence(self):
        A = np.array([[0.2, 0.5, 0.3, 0.0],
                      [0.1, 0.1, 0.8, 0.0]])
        mask = np.array([True, True, True, False])
        assert np.allclose(hop_sum(A, mask), [0.3, 0.6, 1.1])

    def test_pad_columns_dropped(self):
        A = np.ones((3, 5))
        mask = np.array([True, False, True, False, False])
        assert hop_sum(A, mask).shape == (2,)


class TestNormalize:
    def test_endpoints(self):
        x = normalize_minmax(np.array([2.0, 5.0, 11.0]))
        assert x.min() == 0.0 and x.max() == 1.0
        assert np.allclose(x, [0.0, 1.0 / 3.0, 1.0])

    def test_constant_vector_all_ones(self):
        assert normalize_minmax(np.array([0.4, 0.4, 0.4])).tolist() == [1.0, 1.0, 1.0]

    def test_single_value_is_one(self):
        assert normalize_minmax(np.array([123.0])).tolist() == [1.0]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            normalize_minmax(np.array([]))

    def test_random_vectors_stay_in_unit_interval(self):
        rng = np.random.default_rng(13)
        for _ in range(500):
            n = int(rng.integers(1, 12))
            x = normalize_minmax(rng.normal(size=n) * 10)
            assert x.min() >= 0.0 and x.max() <= 1.0
            assert x.max() == 1.0  # the top sentence always survives


class TestSelect:
    def test_threshold_boundary_inclusive(self):
        review = review_with(3)
        kept = select(review, np.array([0.69, 0.7, 0.71]), SelectionConfig(v_th=0.7))
        assert [s.sent_index for s in kept] == [1, 2]

    def test_zero_threshold_keeps_everything(self):
        review = review_with(4)
        kept = select(review, np.array([0.0, 0.3, 0.6, 1.0]), SelectionConfig(v_th=0.0))
        assert len(kept) == 4

    def test_order_preserved(self):
        review = review_with(5)
        kept = select(review, np.array([1.0, 0.0, 1.0, 0.0, 1.0]), SelectionConfig(v_th=0.5))
        assert [s.sent_index for s in kept] == [0, 2, 4]

    def test_score_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            select(review_with(3), np.array([1.0, 0.5]), SelectionConfig())

    def test_monotone_over_threshold_ladder(self):
        """Raising the threshold never adds a sentence."""
        rng = np.random.default_rng(29)
        for _ in range(500):
            n = int(rng.integers(1, 11))
            review = review_with(n)
            x = normalize_minmax(rng.uniform(size=n))
            for low in THRESHOLDS:
                for high in THRESHOLDS:
                    if low > high:
                        continue
                    kept_low = {s.sent_index for s in select(review, x, SelectionConfig(low))}
                    kept_high = {s.sent_index for s in select(review, x, SelectionConfig(high))}
                    assert kept_high <= kept_low


class TestScoreFiles:
    def test_round_trip(self, tmp_path):
        scores = [
            SentenceScore("r1", 0, raw=1.25, normalized=0.5),
            SentenceScore("r1", 1, raw=2.5, normalized=1.0),
            SentenceScore("r2", 0, raw=0.125, normalized=0.0),
        ]
        buf = io.StringIO()
        write_scores(scores, buf)
        path = tmp_path / "scores.jsonl"
        path.write_text(buf.getvalue())
        table = read_scores(path)
        assert len(table) == 3
        assert table[("r1", 1)] == scores[1]
