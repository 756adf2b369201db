"""Command-line interface.

Subcommands: train, eval, tag, audit, stats, synth, convert-logits.  All
randomness is routed through --seed; reports print both human-readable
tables and machine-readable key=value lines.  Data errors exit 1, usage
errors exit 2.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import align as align_mod
from . import corpus as corpus_mod
from . import crf as crf_mod
from . import emit as emit_mod
from . import train as train_mod
from .align import AlignedSentence, WordpieceSegmenter, whole_word_segmenter
from .emit import FeatureEmitter
from .errors import AbsatagError, MalformedRecord
from .labels import LabelSpace
from .metrics import audit_bio, evaluate
from .model_io import load_model, save_model
from .train import TrainConfig


def _segmenter_from_args(args) -> align_mod.Segmenter:
    if getattr(args, "vocab", None):
        return WordpieceSegmenter.from_file(args.vocab)
    return whole_word_segmenter


def _sidecar_segments(path: str) -> dict[str, list[tuple[int, int]]]:
    spans: dict[str, list[tuple[int, int]]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                sid = str(record["id"])
                spans[sid] = [(int(a), int(b)) for a, b in record["spans"]]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise MalformedRecord(
                    f"{path} line {line_number}: bad sidecar record ({exc})"
                ) from None
    return spans


def _align_corpus(
    sentences: list[corpus_mod.Sentence],
    args,
    max_subwords: int,
) -> list[AlignedSentence]:
    """Aligned views for a list of corpus sentences.

    With --sidecar the exporter's segmentation is used (subwords come from
    the logits records named by --emissions); otherwise the local segmenter.
    """
    sidecar_path = getattr(args, "sidecar", None)
    if sidecar_path:
        logits_path = _external_path(args)
        if logits_path is None:
            raise MalformedRecord("--sidecar requires --emissions external:PATH")
        records = emit_mod.read_logits(logits_path)
        spans_by_sid = _sidecar_segments(sidecar_path)
        aligned = []
        for sentence in sentences:
            if sentence.sid not in spans_by_sid:
                raise MalformedRecord(
                    f"sidecar has no record for sentence {sentence.sid!r}"
                )
            record = records.get(sentence.sid)
            if record is None:
                raise MalformedRecord(
                    f"logits file has no record for sentence {sentence.sid!r}"
                )
            spans = spans_by_sid[sentence.sid]
            segments = [list(record.subwords[a : b + 1]) for a, b in spans]
            aligned.append(
                align_mod.from_segments(
                    sentence.words,
                    sentence.labels,
                    segments,
                    max_subwords=max_subwords,
                    sid=sentence.sid,
                )
            )
        return aligned
    segmenter = _segmenter_from_args(args)
    out = []
    for sentence in sentences:
        out.append(
            align_mod.from_segments(
                sentence.words,
                sentence.labels,
                [segmenter(w) for w in sentence.words],
                max_subwords=max_subwords,
                sid=sentence.sid,
            )
        )
    return out


def _external_path(args) -> str | None:
    spec = getattr(args, "emissions", "features")
    if spec == "features":
        return None
    if spec.startswith("external:"):
        return spec.split(":", 1)[1]
    raise MalformedRecord(
        f"--emissions must be 'features' or 'external:PATH', got {spec!r}"
    )


def _config_from_args(args) -> TrainConfig:
    overrides = {}
    for key in (
        "learning_rate",
        "weight_decay",
        "batch_size",
        "epochs",
        "warmup_fraction",
        "seed",
        "threads",
    ):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if args.mask_train:
        overrides["mask_in_training"] = True
    if args.mask_decode:
        overrides["mask_in_decoding"] = True
    if args.config:
        return TrainConfig.from_file(args.config, **overrides)
    config = TrainConfig(**overrides)
    config.validate()
    return config


def _cmd_train(args) -> int:
    config = _config_from_args(args)
    corpus = corpus_mod.read_conll(args.train, split=corpus_mod.TRAIN, sid_prefix="t")
    if args.val:
        val = corpus_mod.read_conll(
            args.val, split=corpus_mod.VALIDATION, sid_prefix="v"
        )
        corpus = corpus_mod.merge(corpus, val)
    else:
        n_train = args.n_train
        if n_train is None:
            n_train = max(1, len(corpus) - max(1, len(corpus) // 5))
        corpus = corpus_mod.split_train_validation(corpus, n_train, seed=config.seed)

    labelspace = LabelSpace()
    train_aligned = _align_corpus(
        corpus.split(corpus_mod.TRAIN), args, args.max_subwords
    )
    val_aligned = _align_corpus(
        corpus.split(corpus_mod.VALIDATION), args, args.max_subwords
    )

    external_path = _external_path(args)
    if external_path is None:
        emitter = FeatureEmitter()
        external = None
    else:
        emitter = None
        external = emit_mod.load_external(
            external_path, train_aligned + val_aligned
        )

    result = train_mod.train(
        config,
        train_aligned,
        val_aligned,
        labelspace,
        emitter=emitter,
        external=external,
        vocab_ref=args.vocab,
    )
    chosen = result.best_model if args.select == "best" else result.model
    save_model(chosen, args.model_out)
    if args.metrics_out:
        with open(args.metrics_out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(train_mod.history_csv_lines(result.history)) + "\n")
    print(f"model_out={args.model_out}")
    print(f"epochs_run={len(result.history)}")
    print(f"best_epoch={result.best_epoch}")
    if result.history:
        print(f"final_val_f1={result.history[-1].val_token_f1:.6f}")
        best = max(r.val_token_f1 for r in result.history)
        print(f"best_val_f1={best:.6f}")
    return 0


def _read_labeled(path: str, split: str) -> corpus_mod.Corpus:
    return corpus_mod.read_conll(path, split=split)


def _cmd_eval(args) -> int:
    gold = _read_labeled(args.gold, "gold")
    pred = _read_labeled(args.pred, "pred")
    if len(gold) != len(pred):
        raise MalformedRecord(
            f"gold has {len(gold)} sentences, pred has {len(pred)}"
        )
    gold_labels = [list(s.labels) for s in gold.sentences]
    pred_labels = [list(s.labels) for s in pred.sentences]
    words = [list(s.words) for s in gold.sentences]
    sids = [s.sid for s in gold.sentences]
    report = evaluate(gold_labels, pred_labels, sids=sids, words=words)
    print(report.render())
    if args.violations_csv:
        with open(args.violations_csv, "w", encoding="utf-8") as fh:
            fh.write("sentence,position,bigram,context\n")
            for v in report.violations:
                fh.write(f"{v.sid},{v.position},{v.bigram},{v.context}\n")
    return 0


def _cmd_tag(args) -> int:
    model = load_model(args.model)
    corpus = corpus_mod.read_conll(args.data, allow_unlabeled=True, sid_prefix="d")
    labelspace = LabelSpace()
    mask = labelspace.mask if args.mask_decode else None
    external_path = _external_path(args)

    tagged: list[corpus_mod.Sentence] = []
    unlabeled = [
        corpus_mod.Sentence(sid=s.sid, words=s.words, labels=None, split=s.split)
        for s in corpus.sentences
    ]
    aligned_all = _align_corpus(unlabeled, args, args.max_subwords)
    external = (
        emit_mod.load_external(external_path, aligned_all) if external_path else None
    )
    for sentence, aligned in zip(corpus.sentences, aligned_all):
        if external is not None:
            emissions = external[aligned.sid]
        else:
            if model.emitter is None:
                raise MalformedRecord(
                    "model has no emission weights; pass --emissions external:PATH"
                )
            emissions = model.emitter.emit(aligned)
        path, _ = crf_mod.viterbi(model.params, emissions, mask)
        tags = labelspace.decode(path)
        word_labels, _ = align_mod.collapse_with_repairs(aligned, tags)
        tagged.append(
            corpus_mod.Sentence(
                sid=sentence.sid,
                words=sentence.words,
                labels=tuple(word_labels),
                split=sentence.split,
            )
        )
    corpus_mod.write_conll(tagged, args.out)
    print(f"tagged={len(tagged)}")
    print(f"out={args.out}")
    return 0


def _cmd_audit(args) -> int:
    pred = _read_labeled(args.pred, "pred")
    labels = [list(s.labels) for s in pred.sentences]
    words = [list(s.words) for s in pred.sentences]
    sids = [s.sid for s in pred.sentences]
    violations = audit_bio(labels, sids=sids, words=words)
    print(f"bio_violations={len(violations)}")
    for v in violations:
        print(f"  sentence {v.sid} position {v.position}: {v.context or v.bigram}")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write("sentence,position,bigram,context\n")
            for v in violations:
                fh.write(f"{v.sid},{v.position},{v.bigram},{v.context}\n")
    return 0


def _cmd_stats(args) -> int:
    parts = []
    if args.data:
        parts.append(corpus_mod.read_conll(args.data, split=corpus_mod.TRAIN))
    if args.test:
        parts.append(corpus_mod.read_conll(args.test, split=corpus_mod.TEST))
    if not parts:
        raise MalformedRecord("stats needs --data and/or --test")
    merged = corpus_mod.merge(*parts)
    print(corpus_mod.render_stats(corpus_mod.stats(merged)))
    if args.show_mask:
        print()
        print(LabelSpace().render_mask_table())
    return 0


def _cmd_synth(args) -> int:
    corpus = corpus_mod.synth_corpus(args.n_train, args.n_test, seed=args.seed)
    corpus_mod.write_conll(corpus.split(corpus_mod.TRAIN), args.train_out)
    corpus_mod.write_conll(corpus.split(corpus_mod.TEST), args.test_out)
    if args.vocab_out:
        with open(args.vocab_out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(corpus_mod.synth_vocab()) + "\n")
    print(f"train_sentences={args.n_train}")
    print(f"test_sentences={args.n_test}")
    return 0


def _cmd_convert_logits(args) -> int:
    corpus = corpus_mod.read_conll(args.data, allow_unlabeled=True, sid_prefix="d")
    args.emissions = f"external:{args.logits}"
    aligned = _align_corpus(corpus.sentences, args, args.max_subwords)
    matrices = emit_mod.load_external(args.logits, aligned)
    emit_mod.write_logits(
        args.out,
        ((s.sid, s.subwords, matrices[s.sid]) for s in aligned),
    )
    print(f"records={len(aligned)}")
    print(f"out={args.out}")
    return 0


def _add_segmentation_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--vocab", help="subword vocabulary file (one piece per line)")
    parser.add_argument(
        "--sidecar", help="segmentation sidecar from an external exporter"
    )
    parser.add_argument(
        "--max-subwords",
        type=int,
        default=align_mod.DEFAULT_SUBWORD_CAP,
        dest="max_subwords",
        help="reject sentences longer than this many subwords",
    )


def _add_emissions_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--emissions",
        default="features",
        help="'features' (hashed-feature model) or 'external:PATH' (logits file)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="absatag",
        description="Aspect/opinion sequence tagging with a subword-aware CRF",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model on a CoNLL corpus")
    p.add_argument("--train", required=True, help="training CoNLL file")
    p.add_argument("--val", help="validation CoNLL file (else split from train)")
    p.add_argument("--n-train", type=int, dest="n_train",
                   help="train/validation split size when --val is absent")
    p.add_argument("--model-out", required=True, dest="model_out")
    p.add_argument("--metrics-out", dest="metrics_out", help="per-epoch CSV")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--weight-decay", type=float, dest="weight_decay")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--epochs", type=int)
    p.add_argument("--warmup-fraction", type=float, dest="warmup_fraction")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--mask-train", action="store_true", dest="mask_train")
    p.add_argument("--mask-decode", action="store_true", dest="mask_decode")
    p.add_argument("--select", choices=("best", "final"), default="best",
                   help="which checkpoint to save")
    _add_segmentation_args(p)
    _add_emissions_arg(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="score predictions against gold labels")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--violations-csv", dest="violations_csv")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("tag", help="label a CoNLL token file with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="CoNLL tokens (labels optional)")
    p.add_argument("--out", required=True)
    p.add_argument("--mask-decode", action="store_true", dest="mask_decode")
    _add_segmentation_args(p)
    _add_emissions_arg(p)
    p.set_defaults(func=_cmd_tag)

    p = sub.add_parser("audit", help="count invalid BIO transitions")
    p.add_argument("--pred", required=True)
    p.add_argument("--csv")
    p.set_defaults(func=_cmd_audit)

    p = sub.add_parser("stats", help="label distribution and vocabulary overlap")
    p.add_argument("--data", help="training CoNLL file")
    p.add_argument("--test", help="test CoNLL file")
    p.add_argument("--show-mask", action="store_true", dest="show_mask",
                   help="also print the transition-constraint table")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("synth", help="generate a seeded synthetic corpus")
    p.add_argument("--n-train", type=int, default=500, dest="n_train")
    p.add_argument("--n-test", type=int, default=100, dest="n_test")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-out", required=True, dest="train_out")
    p.add_argument("--test-out", required=True, dest="test_out")
    p.add_argument("--vocab-out", dest="vocab_out")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser(
        "convert-logits",
        help="validate an external-logits file and rewrite it ten-column",
    )
    p.add_argument("--logits", required=True)
    p.add_argument("--data", required=True, help="CoNLL file the records belong to")
    p.add_argument("--out", required=True)
    _add_segmentation_args(p)
    p.set_defaults(func=_cmd_convert_logits)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AbsatagError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
