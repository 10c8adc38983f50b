"""Command-line pipeline orchestration.

Subcommands wire the stages together through their file formats only, so any
stage can be re-run in isolation: ``train-attention``, ``select``, ``label``,
``train-ate``, ``eval``, ``baseline``, ``dump-attention``, and ``run-all``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import html
import json
import os
import sys
from dataclasses import asdict, replace

import numpy as np

from . import attention, baselines, embeddings, metrics, rules, selection, tagger
from . import corpus as corpus_mod
from .config import ConfigError, PipelineConfig, derive_seed, load_config

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config file (INI format)")
    common.add_argument("--seed", type=int, help="root random seed (overrides config)")
    common.add_argument("--threads", type=int, default=1,
                        help="worker thread cap (reserved; stages run single-threaded)")
    common.add_argument("--out", help="output directory (overrides config)")

    parser = _Parser(prog="atekit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train-attention", parents=[common],
                       help="train the rating model and write a checkpoint")
    p.set_defaults(fn=cmd_train_attention)

    p = sub.add_parser("select", parents=[common],
                       help="score sentences and write one filtered corpus per threshold")
    p.add_argument("--checkpoint", help="attention checkpoint (default: <out>/checkpoint.json)")
    p.set_defaults(fn=cmd_select)

    p = sub.add_parser("label", parents=[common],
                       help="rule-label a selected corpus into a training dataset")
    p.add_argument("--selected", help="selected corpus file (default: the configured corpus)")
    p.add_argument("--ald", help="output dataset path (default: <out>/ald.tsv)")
    p.set_defaults(fn=cmd_label)

    p = sub.add_parser("train-ate", parents=[common],
                       help="train a sequence labeler on a labelled dataset")
    p.add_argument("--ald", help="labelled dataset path (default: <out>/ald.tsv)")
    p.add_argument("--model", help="output model path (default: <out>/model.json)")
    p.add_argument("--kind", choices=["linear", "crf"], help="labeler family")
    p.set_defaults(fn=cmd_train_ate)

    p = sub.add_parser("eval", parents=[common],
                       help="exact-span scores of a prediction file against gold")
    p.add_argument("--pred", required=True, help="predicted tags (FORM/UPOS/TAG chunks)")
    p.add_argument("--gold", required=True,
                   help="gold tags (chunk file, or .conllu carrying Gold= annotations)")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("baseline", parents=[common],
                       help="run one rule baseline on a gold corpus")
    p.add_argument("--kind", dest="baseline_kind", required=True,
                   choices=["b1", "b2", "b3", "b4", "arc_any", "arc_adj", "rules_core", "rules_full"])
    p.add_argument("--lexicon", help="sentiment lexicon path (overrides config)")
    p.add_argument("--test", help="gold corpus path (overrides config test_corpus)")
    p.set_defaults(fn=cmd_baseline)

    p = sub.add_parser("dump-attention", parents=[common],
                       help="render per-sentence scores with highlighted terms")
    p.add_argument("--checkpoint", help="attention checkpoint (default: <out>/checkpoint.json)")
    p.add_argument("--threshold", type=float, default=0.7, help="selection threshold for the view")
    p.add_argument("--format", choices=["text", "html"], default="text")
    p.add_argument("--render-out", help="write the rendering here instead of stdout")
    p.set_defaults(fn=cmd_dump_attention)

    p = sub.add_parser("run-all", parents=[common],
                       help="full pipeline: train, select, label, train labelers, evaluate")
    p.set_defaults(fn=cmd_run_all)
    return parser


def _load_cfg(args) -> PipelineConfig:
    return load_config(args.config, seed=args.seed, out=args.out,
                       tagger_kind=getattr(args, "kind", None))


def _outdir(cfg: PipelineConfig) -> str:
    path = cfg.path("output_dir")
    os.makedirs(path, exist_ok=True)
    return path


def _embedding_source(cfg: PipelineConfig):
    if cfg.paths.get("sentence_vectors"):
        source = embeddings.PrecomputedSource(
            embeddings.load_sentence_vectors(cfg.paths["sentence_vectors"]))
    elif cfg.paths.get("word_vectors"):
        source = embeddings.AveragingSource(
            embeddings.load_word_vectors(cfg.paths["word_vectors"]))
    else:
        raise ConfigError("missing path 'word_vectors' or 'sentence_vectors': "
                          "set one under [paths] in the config")
    if source.dimension != cfg.model.d:
        raise ConfigError(
            f"embedding dimension {source.dimension} does not match model d={cfg.model.d}")
    return source


def _prepared_reviews(cfg: PipelineConfig) -> list[corpus_mod.Review]:
    reviews = corpus_mod.parse_conllu_file(cfg.path("corpus"))
    return corpus_mod.filter_reviews(reviews, cfg.corpus)


def _rating_examples(cfg, reviews, source):
    padded = [corpus_mod.pad_review(r, cfg.corpus.n_max) for r in reviews]
    return [(embeddings.review_matrix(r, source, cfg.corpus.n_max), r.stars) for r in padded]


def _train_val_split(data, cfg: PipelineConfig):
    rng = np.random.default_rng(derive_seed(cfg.seed, "split"))
    order = rng.permutation(len(data))
    n_val = int(len(data) * cfg.val_fraction)
    val = [data[i] for i in order[:n_val]]
    train = [data[i] for i in order[n_val:]]
    return train, val


def _checkpoint_path(cfg, args) -> str:
    explicit = getattr(args, "checkpoint", None)
    if explicit:
        return explicit
    return os.path.join(cfg.path("output_dir"), "checkpoint.json")


def _threshold_tag(th: float) -> str:
    return format(th, "g")


def _write_json(payload, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True, indent=2)
        f.write("\n")


def _train_attention_once(cfg: PipelineConfig, out: str, reviews, source):
    data = _rating_examples(cfg, reviews, source)
    train, val = _train_val_split(data, cfg)
    mcfg = replace(cfg.model, seed=derive_seed(cfg.seed, "attention"))
    params, head, log = attention.train(train, val, mcfg)
    ckpt = os.path.join(out, "checkpoint.json")
    attention.save_checkpoint(ckpt, mcfg, params, head, log)
    _write_json([asdict(e) for e in log], os.path.join(out, "train_log.json"))
    return ckpt, params, head, log


def cmd_train_attention(args) -> int:
    cfg = _load_cfg(args)
    out = _outdir(cfg)
    reviews = _prepared_reviews(cfg)
    source = _embedding_source(cfg)
    ckpt, _, _, log = _train_attention_once(cfg, out, reviews, source)
    print(f"checkpoint written to {ckpt} ({len(log)} epochs)")
    return EXIT_OK


def _renumbered(review_id: str, stars: int, kept) -> corpus_mod.Review:
    sents = tuple(replace(s, sent_index=i) for i, s in enumerate(kept))
    return corpus_mod.Review(review_id=review_id, stars=stars, sentences=sents)


def _select_corpora(cfg, reviews, scores):
    """One renumbered corpus per threshold; empty reviews drop out."""
    by_key = {(s.review_id, s.sent_index): s.normalized for s in scores}
    out = {}
    for th in cfg.thresholds:
        sel_cfg = selection.SelectionConfig(v_th=th)
        kept_reviews = []
        for review in reviews:
            x = np.array([by_key[s.key] for s in review.real_sentences])
            kept = selection.select(review, x, sel_cfg)
            if kept:
                kept_reviews.append(_renumbered(review.review_id, review.stars, kept))
        out[th] = kept_reviews
    return out


def cmd_select(args) -> int:
    cfg = _load_cfg(args)
    out = _outdir(cfg)
    mcfg, params, _, _ = attention.load_checkpoint(_checkpoint_path(cfg, args))
    reviews = _prepared_reviews(cfg)
    source = _embedding_source(replace_model_d(cfg, mcfg))
    scores = selection.score_corpus(params, source, reviews, cfg.corpus.n_max)
    with open(os.path.join(out, "scores.jsonl"), "w", encoding="utf-8") as f:
        selection.write_scores(scores, f)
    for th, kept in _select_corpora(cfg, reviews, scores).items():
        path = os.path.join(out, f"selected_{_threshold_tag(th)}.conllu")
        corpus_mod.write_conllu_file(kept, path)
        n = sum(len(r.sentences) for r in kept)
        print(f"threshold {_threshold_tag(th)}: {n} sentences -> {path}")
    return EXIT_OK


def replace_model_d(cfg: PipelineConfig, mcfg: attention.ModelConfig) -> PipelineConfig:
    """Checkpoint dimensions win over the config file when loading a model."""
    if cfg.model.d == mcfg.d:
        return cfg
    clone = replace(cfg.model, d=mcfg.d, r=mcfg.r, d_a=mcfg.d_a, h=mcfg.h)
    return replace(cfg, model=clone)


def _flat_sentences(reviews) -> list[corpus_mod.Sentence]:
    return [s for r in reviews for s in r.real_sentences]


def cmd_label(args) -> int:
    cfg = _load_cfg(args)
    out = _outdir(cfg)
    path = args.selected or cfg.path("corpus")
    sentences = _flat_sentences(corpus_mod.parse_conllu_file(path))
    lexicon = rules.load_lexicon(cfg.path("lexicon"))
    ald = rules.label_corpus(sentences, cfg.labeler, rules.default_rules(), lexicon)
    ald_path = args.ald or os.path.join(out, "ald.tsv")
    with open(ald_path, "w", encoding="utf-8") as f:
        rules.write_ald(ald, f)
    spans = sum(tags.count("B") for tags in (ls.tags for ls in ald))
    print(f"labelled {len(ald)} sentences ({spans} spans) -> {ald_path}")
    return EXIT_OK


def cmd_train_ate(args) -> int:
    cfg = _load_cfg(args)
    out = _outdir(cfg)
    ald_path = args.ald or os.path.join(out, "ald.tsv")
    ald = rules.read_ald(ald_path)
    tcfg = replace(cfg.train, seed=derive_seed(cfg.seed, "tagger"))
    if cfg.tagger_kind == "crf":
        model = tagger.train_crf_perceptron(ald, tcfg)
    else:
        model = tagger.train_linear(ald, tcfg)
    model_path = args.model or os.path.join(out, "model.json")
    tagger.save_model(model, model_path)
    print(f"{cfg.tagger_kind} model trained on {len(ald)} sentences -> {model_path}")
    return EXIT_OK


def _gold_chunks(path):
    """(forms, tags) pairs from a chunk file or a Gold=-annotated corpus."""
    if str(path).endswith(".conllu"):
        out = []
        for sent in _flat_sentences(corpus_mod.parse_conllu_file(path)):
            tags = corpus_mod.gold_tags(sent)
            if tags is None:
                raise ValueError(f"sentence {sent.key} in {path} has no gold tags")
            out.append((sent.forms, tags))
        return out
    return [([form for form, _, _ in rows], [tag for _, _, tag in rows])
            for _, rows in rules.read_tagged(path)]


def cmd_eval(args) -> int:
    pred = _gold_chunks(args.pred)
    gold = _gold_chunks(args.gold)
    if len(pred) != len(gold):
        raise ValueError(f"sentence count mismatch: {len(pred)} predicted vs {len(gold)} gold")
    pred_spans, gold_spans = set(), set()
    for i, ((p_forms, p_tags), (g_forms, g_tags)) in enumerate(zip(pred, gold)):
        if len(p_tags) != len(g_tags):
            raise ValueError(f"sentence {i}: length mismatch {len(p_tags)} vs {len(g_tags)}")
        pred_spans |= metrics.extract_spans(p_tags, key=i)
        gold_spans |= metrics.extract_spans(g_tags, key=i)
    result = metrics.prf(pred_spans, gold_spans)
    print(json.dumps(result.as_dict(), sort_keys=True, indent=2))
    return EXIT_OK


_BASELINE_NAMES = {
    "b1": baselines.BaselineKind.ARC_ANY,
    "b2": baselines.BaselineKind.ARC_ADJ,
    "b3": baselines.BaselineKind.RULES_CORE,
    "b4": baselines.BaselineKind.RULES_FULL,
}


def cmd_baseline(args) -> int:
    cfg = _load_cfg(args)
    kind = _BASELINE_NAMES.get(args.baseline_kind) or baselines.BaselineKind(args.baseline_kind)
    lexicon = rules.load_lexicon(args.lexicon or cfg.path("lexicon"))
    test_path = args.test or cfg.path("test_corpus")
    sentences = _flat_sentences(corpus_mod.parse_conllu_file(test_path))
    pred_spans, gold_spans = set(), set()
    for sent in sentences:
        gold = corpus_mod.gold_tags(sent)
        if gold is None:
            raise ValueError(f"sentence {sent.key} has no gold tags")
        labeled = baselines.predict_baseline(kind, sent, lexicon)
        pred_spans |= metrics.extract_spans(labeled.tags, key=sent.key)
        gold_spans |= metrics.extract_spans(gold, key=sent.key)
    result = metrics.prf(pred_spans, gold_spans)
    print(json.dumps(result.as_dict(), sort_keys=True, indent=2))
    return EXIT_OK


def _term_spans(sentence, lexicon) -> set[tuple[int, int]]:
    # highlighting ignores the frequency filter so rule hits stay visible
    cand = frozenset(
        pos for pos, tok in enumerate(sentence.tokens) if tok.upos in rules.NOUN_TAGS
    )
    marked = rules.apply_rules(sentence, rules.default_rules(), lexicon, cand)
    labeled = rules.assign_iob(sentence, marked)
    return {(s.start, s.end) for s in metrics.extract_spans(labeled.tags)}


def _render_text(view_rows) -> str:
    lines = []
    for review, rows in view_rows:
        lines.append(f"review {review.review_id} (stars={review.stars})")
        for score, kept, pieces in rows:
            marker = "+" if kept else " "
            body = "".join(
                f"[[{text}]]" if status == "sel" else f"(({text}))" if status == "drop" else text
                for status, text in pieces
            )
            lines.append(f"  [{score:.3f}{marker}] {body}")
        lines.append("")
    return "\n".join(lines)


def _render_html(view_rows, threshold: float) -> str:
    out = [
        "<!DOCTYPE html>",
        "<html><head><meta charset='utf-8'><title>attention scores</title><style>",
        "body{font-family:sans-serif;max-width:60em;margin:2em auto}",
        ".sent{margin:.2em 0;padding:.2em .4em}",
        ".kept{background:#eef6ee}",
        ".score{color:#666;font-size:.85em;margin-right:.6em}",
        ".sel{background:#8bd48b;padding:0 .15em}",
        ".drop{background:#f0b46a;padding:0 .15em}",
        "</style></head><body>",
        f"<p>selection threshold: {threshold:g}; terms in kept sentences are "
        "green, terms in dropped sentences orange.</p>",
    ]
    for review, rows in view_rows:
        out.append(f"<h3>review {html.escape(review.review_id)} (stars={review.stars})</h3>")
        for score, kept, pieces in rows:
            cls = "sent kept" if kept else "sent"
            body = "".join(
                f"<span class='{status}'>{html.escape(text)}</span>" if status else html.escape(text)
                for status, text in pieces
            )
            out.append(f"<div class='{cls}'><span class='score'>{score:.3f}</span>{body}</div>")
    out.append("</body></html>")
    return "\n".join(out)


def cmd_dump_attention(args) -> int:
    cfg = _load_cfg(args)
    mcfg, params, _, _ = attention.load_checkpoint(_checkpoint_path(cfg, args))
    cfg = replace_model_d(cfg, mcfg)
    reviews = _prepared_reviews(cfg)
    source = _embedding_source(cfg)
    scores = selection.score_corpus(params, source, reviews, cfg.corpus.n_max)
    by_key = {(s.review_id, s.sent_index): s.normalized for s in scores}
    lexicon = (rules.load_lexicon(cfg.paths["lexicon"])
               if cfg.paths.get("lexicon") else rules.SentimentLexicon({}))
    view_rows = []
    for review in reviews:
        rows = []
        for sent in review.real_sentences:
            score = by_key[sent.key]
            kept = score >= args.threshold
            spans = _term_spans(sent, lexicon)
            status_of = {}
            for start, end in spans:
                for pos in range(start, end + 1):
                    status_of[pos] = "sel" if kept else "drop"
            pieces = []
            for pos, tok in enumerate(sent.tokens):
                if pos:
                    pieces.append((None, " "))
                pieces.append((status_of.get(pos), tok.form))
            rows.append((score, kept, pieces))
        view_rows.append((review, rows))
    rendering = (_render_html(view_rows, args.threshold)
                 if args.format == "html" else _render_text(view_rows))
    if args.render_out:
        with open(args.render_out, "w", encoding="utf-8") as f:
            f.write(rendering + "\n")
        print(f"rendering written to {args.render_out}")
    else:
        print(rendering)
    return EXIT_OK


def cmd_run_all(args) -> int:
    cfg = _load_cfg(args)
    out = _outdir(cfg)
    reviews = _prepared_reviews(cfg)
    source = _embedding_source(cfg)
    lexicon = rules.load_lexicon(cfg.path("lexicon"))
    test_sentences = _flat_sentences(corpus_mod.parse_conllu_file(cfg.path("test_corpus")))
    test_gold = []
    for sent in test_sentences:
        gold = corpus_mod.gold_tags(sent)
        if gold is None:
            raise ValueError(f"test sentence {sent.key} has no gold tags")
        test_gold.append((sent, gold))

    _, params, _, log = _train_attention_once(cfg, out, reviews, source)
    print(f"attention model trained ({len(log)} epochs)")

    scores = selection.score_corpus(params, source, reviews, cfg.corpus.n_max)
    with open(os.path.join(out, "scores.jsonl"), "w", encoding="utf-8") as f:
        selection.write_scores(scores, f)

    summary = {}
    corpora = _select_corpora(cfg, reviews, scores)
    for th in cfg.thresholds:
        tag = _threshold_tag(th)
        kept = corpora[th]
        corpus_mod.write_conllu_file(kept, os.path.join(out, f"selected_{tag}.conllu"))
        selected_sentences = _flat_sentences(kept)
        ald = rules.label_corpus(selected_sentences, cfg.labeler, rules.default_rules(), lexicon)
        with open(os.path.join(out, f"ald_{tag}.tsv"), "w", encoding="utf-8") as f:
            rules.write_ald(ald, f)
        runs = []
        for run in range(cfg.runs):
            tcfg = replace(cfg.train, seed=derive_seed(cfg.seed, f"tagger:{tag}", run))
            if cfg.tagger_kind == "crf":
                model = tagger.train_crf_perceptron(ald, tcfg)
            else:
                model = tagger.train_linear(ald, tcfg)
            if run == 0:
                tagger.save_model(model, os.path.join(out, f"model_{tag}.json"))
            pred_spans, gold_spans = set(), set()
            for sent, gold in test_gold:
                predicted = tagger.predict_tags(model, sent)
                pred_spans |= metrics.extract_spans(predicted.tags, key=sent.key)
                gold_spans |= metrics.extract_spans(gold, key=sent.key)
            runs.append(metrics.prf(pred_spans, gold_spans))
        th_summary = metrics.summarize_runs(runs)
        summary[tag] = th_summary
        _write_json(th_summary, os.path.join(out, f"metrics_{tag}.json"))
        f1 = th_summary["f1"]
        print(f"threshold {tag}: {len(ald)} sentences, "
              f"F1 {f1['mean']:.4f} +/- {f1['ci_half_width']:.4f} over {cfg.runs} runs")
    _write_json(summary, os.path.join(out, "summary.json"))
    print(f"artifacts in {out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help and friends
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (corpus_mod.CorpusError, embeddings.EmbeddingError, ConfigError,
            OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
