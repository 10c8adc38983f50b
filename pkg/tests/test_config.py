"""Configuration loading, seed derivation, and override precedence."""

import pytest

from atekit.config import (
    DEFAULT_THRESHOLDS,
    ConfigError,
    PipelineConfig,
    derive_seed,
    load_config,
)


class TestDeriveSeed:
    def test_frozen_values(self):
        """Stage seeds are the first four bytes of sha256('root:stage:index'),
        big-endian; values frozen from an independent computation."""
        assert derive_seed(0, "attention") == 1922339756
        assert derive_seed(7, "tagger:0.7", 3) == 588421025
        assert derive_seed(1, "split") == 4274900092

    def test_stages_and_indices_decorrelate(self):
        seen = {derive_seed(0, stage, i) for stage in ("a", "b", "c") for i in range(50)}
        assert len(seen) == 150

    def test_range(self):
        for i in range(100):
            assert 0 <= derive_seed(3, "x", i) < 2**32


class TestDefaults:
    def test_values(self):
        cfg = load_config(None)
        assert (cfg.model.d, cfg.model.r, cfg.model.d_a, cfg.model.h) == (600, 30, 350, 512)
        assert cfg.thresholds == DEFAULT_THRESHOLDS == (0.0, 0.5, 0.6, 0.7, 0.8, 0.99)
        assert (cfg.corpus.n_min, cfg.corpus.n_max) == (3, 10)
        assert cfg.model.n_max == cfg.corpus.n_max
        assert cfg.runs == 25 and cfg.seed == 0
        assert cfg.labeler.min_support == 30
        assert cfg.train.learning_rate == 0.01 and cfg.train.patience == 5
        assert cfg.tagger_kind == "linear"

    def test_missing_path_key_named(self):
        cfg = load_config(None)
        with pytest.raises(ConfigError, match="corpus"):
            cfg.path("corpus")


INI = """
[paths]
corpus = /data/reviews.conllu
lexicon = /data/lex.tsv

[corpus]
n_min = 2
n_max = 6   # inline comment

[model]
d = 24
r = 4

[selection]
thresholds = 0, 0.5, 0.99

[labeler]
min_support = 7

[train]
kind = crf
learning_rate = 0.5

[run]
seed = 9
runs = 3
"""


class TestIniLoading:
    def write(self, tmp_path, text=INI):
        path = tmp_path / "config.ini"
        path.write_text(text)
        return path

    def test_sections_parsed(self, tmp_path):
        cfg = load_config(self.write(tmp_path))
        assert cfg.paths["corpus"] == "/data/reviews.conllu"
        assert (cfg.corpus.n_min, cfg.corpus.n_max) == (2, 6)
        assert cfg.model.n_max == 6  # follows the corpus bound
        assert (cfg.model.d, cfg.model.r) == (24, 4)
        assert cfg.model.d_a == 350  # untouched keys keep defaults
        assert cfg.thresholds == (0.0, 0.5, 0.99)
        assert cfg.labeler.min_support == 7
        assert cfg.tagger_kind == "crf"
        assert cfg.train.learning_rate == 0.5
        assert cfg.runs == 3 and cfg.seed == 9

    def test_seed_flows_into_stage_configs(self, tmp_path):
        cfg = load_config(self.write(tmp_path))
        assert cfg.model.seed == 9 and cfg.train.seed == 9

    def test_space_separated_thresholds(self, tmp_path):
        path = self.write(tmp_path, "[selection]\nthresholds = 0 0.7\n")
        assert load_config(path).thresholds == (0.0, 0.7)

    def test_non_numeric_value_rejected(self, tmp_path):
        path = self.write(tmp_path, "[model]\nd = many\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_unknown_tagger_kind_rejected(self, tmp_path):
        path = self.write(tmp_path, "[train]\nkind = hmm\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_threshold_out_of_range_rejected(self, tmp_path):
        path = self.write(tmp_path, "[selection]\nthresholds = 0, 1.5\n")
        with pytest.raises(ConfigError):
            load_config(path)


class TestOverrides:
    def test_flags_beat_file_values(self, tmp_path):
        path = tmp_path / "config.ini"
        path.write_text(INI)
        cfg = load_config(path, seed=21, out="/tmp/elsewhere",
                          thresholds="0.7", tagger_kind="linear", runs=1)
        assert cfg.seed == 21
        assert cfg.model.seed == 21 and cfg.train.seed == 21
        assert cfg.paths["output_dir"] == "/tmp/elsewhere"
        assert cfg.thresholds == (0.7,)
        assert cfg.tagger_kind == "linear" and cfg.runs == 1

    def test_none_overrides_are_ignored(self, tmp_path):
        path = tmp_path / "config.ini"
        path.write_text(INI)
        cfg = load_config(path, seed=None, thresholds=None, tagger_kind=None)
        assert cfg.seed == 9 and cfg.tagger_kind == "crf"


class TestValidation:
    def test_runs_must_be_positive(self):
        with pytest.raises(ConfigError):
            PipelineConfig(runs=0)

    def test_val_fraction_open_interval(self):
        with pytest.raises(ConfigError):
            PipelineConfig(val_fraction=1.0)
