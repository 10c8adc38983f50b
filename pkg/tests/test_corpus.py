"""Interchange-format parsing, validation, and review handling."""

import io

import numpy as np
import pytest

from atekit.corpus import (
    CorpusConfig,
    CorpusError,
    Review,
    Sentence,
    Token,
    check_tree,
    filter_reviews,
    gold_tags,
    pad_review,
    parse_conllu,
    split_dataset,
    strip_padding,
    write_conllu,
)

SAMPLE = """\
# review_id = r1
# stars = 4
# sent_index = 0
1\tThe\tthe\tDET\t_\t_\t2\tdet\t_\t_
2\tscreen\tscreen\tNOUN\t_\t_\t4\tnsubj\t_\tGold=B
3\tis\tbe\tAUX\t_\t_\t4\tcop\t_\tGold=O
4\tgreat\tgreat\tADJ\t_\t_\t0\troot\t_\tGold=O

# review_id = r1
# stars = 4
# sent_index = 1
1\tI\ti\tPRON\t_\t_\t2\tnsubj\t_\t_
2\tagree\tagree\tVERB\t_\t_\t0\troot\t_\t_

# review_id = r2
# stars = 1
# sent_index = 0
1\tBad\tbad\tADJ\t_\t_\t0\troot\t_\t_
"""


def toy_sentence(review_id="r", sent_index=0, n=3):
    tokens = tuple(
        Token(index=i + 1, form=f"w{i}", lemma=f"w{i}", upos="NOUN",
              head=0 if i == 0 else 1, deprel="root" if i == 0 else "dep")
        for i in range(n)
    )
    return Sentence(tokens=tokens, review_id=review_id, sent_index=sent_index)


class TestParse:
    def test_grouping_and_order(self):
        """Sentences group by review id; reviews keep first-appearance order."""
        reviews = parse_conllu(SAMPLE)
        assert [r.review_id for r in reviews] == ["r1", "r2"]
        assert reviews[0].stars == 4 and reviews[1].stars == 1
        assert [s.sent_index for s in reviews[0].sentences] == [0, 1]
        assert reviews[0].sentences[0].forms == ["The", "screen", "is", "great"]

    def test_sentences_out_of_order_are_reordered(self):
        parts = SAMPLE.split("\n\n")
        reviews = parse_conllu("\n\n".join([parts[1], parts[0], parts[2]]))
        r1 = next(r for r in reviews if r.review_id == "r1")
        assert [s.sent_index for s in r1.sentences] == [0, 1]

    def test_gold_tags_from_misc(self):
        reviews = parse_conllu(SAMPLE)
        assert gold_tags(reviews[0].sentences[0]) == ["O", "B", "O", "O"]
        # no Gold= annotations at all -> None, not a default tagging
        assert gold_tags(reviews[0].sentences[1]) is None

    def test_round_trip(self):
        reviews = parse_conllu(SAMPLE)
        buf = io.StringIO()
        write_conllu(reviews, buf)
        assert parse_conllu(buf.getvalue()) == reviews

    def test_pads_never_written(self):
        reviews = parse_conllu(SAMPLE)
        padded = [pad_review(r, 5) for r in reviews]
        buf = io.StringIO()
        write_conllu(padded, buf)
        assert parse_conllu(buf.getvalue()) == reviews

    @pytest.mark.parametrize("mutate, fragment", [
        (lambda s: s.replace("# stars = 4", "# stars = 9", 1), "stars"),
        (lambda s: s.replace("4\tgreat", "9\tgreat"), "contiguous"),
        (lambda s: s.replace("\t0\troot", "\t4\troot"), "head"),
        (lambda s: s.replace("# sent_index = 1", "# sent_index = 2"), "contiguous"),
        (lambda s: s.replace("# sent_index = 1", "# sent_index = 0"), "duplicate"),
    ])
    def test_structural_violations_raise(self, mutate, fragment):
        with pytest.raises(CorpusError) as err:
            parse_conllu(mutate(SAMPLE))
        assert fragment in str(err.value)

    def test_conflicting_stars_raise(self):
        bad = SAMPLE.replace("# review_id = r1\n# stars = 4\n# sent_index = 1",
                             "# review_id = r1\n# stars = 2\n# sent_index = 1")
        with pytest.raises(CorpusError, match="stars"):
            parse_conllu(bad)

    def test_error_names_line(self):
        with pytest.raises(CorpusError, match="line"):
            parse_conllu(SAMPLE.replace("2\tscreen", "7\tscreen"))


class TestTree:
    def test_cycle_detected(self):
        tokens = (
            Token(1, "a", "a", "NOUN", 2, "dep"),
            Token(2, "b", "b", "NOUN", 1, "dep"),
        )
        with pytest.raises(CorpusError, match="root"):
            check_tree(tokens)

    def test_two_roots_detected(self):
        tokens = (
            Token(1, "a", "a", "NOUN", 0, "root"),
            Token(2, "b", "b", "NOUN", 0, "root"),
        )
        with pytest.raises(CorpusError):
            check_tree(tokens)

    def test_random_trees_accepted(self):
        """Any head assignment where node i attaches to some j < i is a tree."""
        rng = np.random.default_rng(7)
        for _ in range(200):
            n = int(rng.integers(1, 12))
            tokens = []
            for i in range(n):
                head = 0 if i == 0 else int(rng.integers(0, i)) + 1
                tokens.append(Token(i + 1, f"w{i}", f"w{i}", "NOUN",
                                    head if i else 0, "dep" if i else "root"))
            check_tree(tuple(tokens))


class TestReviews:
    def test_filter_bounds_inclusive(self):
        reviews = [
            Review("a", 3, tuple(toy_sentence("a", i) for i in range(k)))
            for k in (1, 2, 3, 5, 6)
        ]
        kept = filter_reviews(reviews, CorpusConfig(n_min=2, n_max=5))
        assert [len(r.sentences) for r in kept] == [2, 3, 5]

    def test_pad_and_strip(self):
        review = Review("a", 3, tuple(toy_sentence("a", i) for i in range(2)))
        padded = pad_review(review, 6)
        assert len(padded.sentences) == 6
        assert [s.is_pad for s in padded.sentences] == [False, False, True, True, True, True]
        assert padded.real_sentences == list(review.sentences)
        assert strip_padding(padded) == review

    def test_pad_overflow_raises(self):
        review = Review("a", 3, tuple(toy_sentence("a", i) for i in range(4)))
        with pytest.raises(ValueError):
            pad_review(review, 3)

    def test_split_deterministic_and_disjoint(self):
        reviews = [Review(f"r{i}", 3, (toy_sentence(f"r{i}"),)) for i in range(30)]
        a = split_dataset(reviews, seed=5, sizes=(20, 5, 5))
        b = split_dataset(reviews, seed=5, sizes=(20, 5, 5))
        assert a == b
        ids = [r.review_id for part in a for r in part]
        assert len(ids) == len(set(ids)) == 30

    def test_split_too_large_raises(self):
        reviews = [Review(f"r{i}", 3, (toy_sentence(f"r{i}"),)) for i in range(4)]
        with pytest.raises(ValueError):
            split_dataset(reviews, seed=0, sizes=(3, 1, 1))
