"""Pipeline configuration: one INI-style file drives every subcommand.

Sections mirror the pipeline stages ([paths], [corpus], [model], [selection],
[labeler], [train], [run]); command-line flags override file values.  All
randomness flows from one root seed, with per-stage seeds derived by stable
hashing so any stage can be re-run in isolation with identical results.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, replace

from .attention import ModelConfig
from .corpus import CorpusConfig
from .rules import LabelerConfig
from .tagger import TrainConfig

__all__ = ["ConfigError", "PipelineConfig", "load_config", "derive_seed", "DEFAULT_THRESHOLDS"]

DEFAULT_THRESHOLDS = (0.0, 0.5, 0.6, 0.7, 0.8, 0.99)


class ConfigError(ValueError):
    pass


def derive_seed(root_seed: int, stage: str, index: int = 0) -> int:
    """Stable per-stage seed: hash of (root seed, stage name, run index)."""
    digest = hashlib.sha256(f"{root_seed}:{stage}:{index}".encode()).digest()
    return int.from_bytes(digest[:4], "big")


@dataclass
class PipelineConfig:
    paths: dict[str, str] = field(default_factory=dict)
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    labeler: LabelerConfig = field(default_factory=LabelerConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    tagger_kind: str = "linear"  # or "crf"
    runs: int = 25
    seed: int = 0
    val_fraction: float = 0.1

    def __post_init__(self):
        for th in self.thresholds:
            if not 0.0 <= th <= 1.0:
                raise ConfigError(f"threshold {th} outside [0, 1]")
        if self.tagger_kind not in ("linear", "crf"):
            raise ConfigError(f"unknown tagger kind {self.tagger_kind!r}")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigError("val_fraction must be in (0, 1)")

    def path(self, key: str) -> str:
        """A configured path, or a ConfigError naming the missing key."""
        value = self.paths.get(key)
        if not value:
            raise ConfigError(f"missing path {key!r}: set [paths] {key} or the matching flag")
        return value


def _get(section, key, cast, default):
    if section is None or key not in section:
        return default
    raw = section[key]
    try:
        return cast(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def _parse_thresholds(raw: str) -> tuple[float, ...]:
    toks = raw.replace(",", " ").split()
    if not toks:
        raise ConfigError("empty threshold list")
    try:
        return tuple(float(t) for t in toks)
    except ValueError:
        raise ConfigError(f"bad threshold list {raw!r}") from None


def load_config(path: str | None = None, **overrides) -> PipelineConfig:
    """Build a PipelineConfig from an optional INI file plus overrides.

    Recognized overrides (flag values, win over the file): seed, out,
    thresholds, tagger_kind, runs.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if path is not None:
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")

    def section(name):
        return parser[name] if parser.has_section(name) else None

    paths = dict(section("paths") or {})
    run_s = section("run")
    seed = _get(run_s, "seed", int, 0)
    runs = _get(run_s, "runs", int, 25)
    val_fraction = _get(run_s, "val_fraction", float, 0.1)

    corpus_s = section("corpus")
    corpus_cfg = CorpusConfig(
        n_min=_get(corpus_s, "n_min", int, 3),
        n_max=_get(corpus_s, "n_max", int, 10),
    )

    model_s = section("model")
    model_cfg = ModelConfig(
        d=_get(model_s, "d", int, 600),
        r=_get(model_s, "r", int, 30),
        d_a=_get(model_s, "d_a", int, 350),
        h=_get(model_s, "h", int, 512),
        n_max=corpus_cfg.n_max,
        learning_rate=_get(model_s, "learning_rate", float, 0.001),
        batch_size=_get(model_s, "batch_size", int, 32),
        max_epochs=_get(model_s, "max_epochs", int, 20),
        patience=_get(model_s, "patience", int, 5),
        seed=seed,
    )

    sel_s = section("selection")
    thresholds = _get(sel_s, "thresholds", _parse_thresholds, DEFAULT_THRESHOLDS)

    lab_s = section("labeler")
    labeler_cfg = LabelerConfig(
        min_support=_get(lab_s, "min_support", int, 30),
        candidate_mode=_get(lab_s, "candidate_mode", str, "nouns_only"),
        max_propagation_rounds=_get(lab_s, "max_propagation_rounds", int, None),
        support_direction=_get(lab_s, "support_direction", str, "at_least"),
    )

    train_s = section("train")
    train_cfg = TrainConfig(
        learning_rate=_get(train_s, "learning_rate", float, 0.01),
        batch_size=_get(train_s, "batch_size", int, 32),
        max_epochs=_get(train_s, "max_epochs", int, 20),
        patience=_get(train_s, "patience", int, 5),
        l2=_get(train_s, "l2", float, 1e-5),
        seed=seed,
    )
    tagger_kind = _get(train_s, "kind", str, "linear")

    if overrides.get("seed") is not None:
        seed = int(overrides["seed"])
        model_cfg = replace(model_cfg, seed=seed)
        train_cfg = replace(train_cfg, seed=seed)
    if overrides.get("out") is not None:
        paths["output_dir"] = overrides["out"]
    if overrides.get("thresholds") is not None:
        thresholds = _parse_thresholds(overrides["thresholds"])
    if overrides.get("tagger_kind") is not None:
        tagger_kind = overrides["tagger_kind"]
    if overrides.get("runs") is not None:
        runs = int(overrides["runs"])

    try:
        return PipelineConfig(
            paths=paths,
            corpus=corpus_cfg,
            model=model_cfg,
            thresholds=thresholds,
            labeler=labeler_cfg,
            train=train_cfg,
            tagger_kind=tagger_kind,
            runs=runs,
            seed=seed,
            val_fraction=val_fraction,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
