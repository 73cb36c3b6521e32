"""Command line interface: ``seeddistill {train,cotrain,predict,eval,synth}``.

Failures print one JSON object to stderr and exit with 2 (unparseable input),
3 (invalid input or flags) or 4 (anything else).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .corpus import encode_corpus, gold_labels, load_corpus, load_embeddings, load_lexicon, load_segment_vectors
from .cotrain import run_iswd
from .errors import SeedDistillError, ValidationError
from .evaluation import (
    ABLATIONS,
    EvalReport,
    Splits,
    confusion_matrix,
    micro_f1_from_confusion,
    per_class_f1,
    run_protocol,
    write_predictions,
)
from .persist import ModelBundle, describe_input, dumps, load_model, save_model
from .student import EMBEDDERS, TrainConfig, student_predict_corpus
from .synth import SynthSpec, generate
from .teacher import teacher_predict

logger = logging.getLogger("seeddistill")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def _add_inputs(p, required=True):
    p.add_argument("--corpus", required=required, help="training segments (JSON lines)")
    p.add_argument("--lexicon", required=required, help="seed lexicon (JSON object)")
    p.add_argument("--embeddings", help="word vectors, text format")
    p.add_argument("--precomputed", help="segment vectors, JSON lines {segment_id, vector}")
    p.add_argument("--stem", action="store_true", help="apply the suffix stemmer to corpus and seeds")


def _add_train_flags(p):
    d = TrainConfig()
    p.add_argument("--embedder", choices=EMBEDDERS, default=d.embedder)
    p.add_argument("--lr", type=float, default=d.learning_rate)
    p.add_argument("--batch", type=int, default=d.batch_size)
    p.add_argument("--dropout", type=float, default=d.dropout_rate)
    p.add_argument("--l2", type=float, default=d.l2_lambda)
    p.add_argument("--epochs", type=int, default=d.max_epochs)
    p.add_argument("--patience", type=int, default=d.patience)
    p.add_argument("--hidden", type=int, default=d.hidden_size, help="tanh hidden layer width (0: none)")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--hard-targets", action="store_true")
    p.add_argument("--finetune-embeddings", action="store_true")


def _add_cotrain_flags(p, max_rounds=5):
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--max-rounds", type=int, default=max_rounds)
    p.add_argument("--warm-start", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="seeddistill", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="one teacher -> student pass")
    _add_inputs(p)
    _add_train_flags(p)
    p.add_argument("--out", required=True, help="model file to write")

    p = sub.add_parser("cotrain", help="iterative co-training until disagreement stops decreasing")
    _add_inputs(p)
    _add_train_flags(p)
    _add_cotrain_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--log", help="per-round JSON lines (default: <out>.rounds.jsonl)")

    p = sub.add_parser("predict", help="apply teacher and/or student to a corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--precomputed")
    p.add_argument("--who", choices=("teacher", "student", "both"), default="both")
    p.add_argument("--out", help="CSV path (default: stdout)")

    p = sub.add_parser("eval", help="micro-F1 of a model, or of N fresh runs")
    _add_inputs(p, required=False)
    p.add_argument("--model")
    p.add_argument("--test", required=True)
    p.add_argument("--validation")
    p.add_argument("--runs", type=int, help="retrain with seeds 1..N (default: score --model as is)")
    p.add_argument("--ablation", choices=ABLATIONS, default="none")
    _add_train_flags(p)
    _add_cotrain_flags(p, max_rounds=1)
    p.add_argument("--out", help="report JSON (default: stdout)")
    p.add_argument("--predictions", help="per-segment CSV")

    p = sub.add_parser("synth", help="write a synthetic corpus, lexicon and embeddings")
    d = SynthSpec()
    p.add_argument("--out-dir", required=True)
    p.add_argument("--K", type=int, default=d.K)
    p.add_argument("--vocab-size", type=int, default=d.vocab_size)
    p.add_argument("--n-segments", type=int, default=d.n_segments)
    p.add_argument("--min-length", type=int, default=d.segment_length[0])
    p.add_argument("--max-length", type=int, default=d.segment_length[1])
    p.add_argument("--seeds-per-aspect", type=int, default=d.seeds_per_aspect)
    p.add_argument("--p-seed", type=float, default=d.p_seed)
    p.add_argument("--noise-frac", type=float, default=d.noise_frac)
    p.add_argument("--dim", type=int, default=d.dim)
    p.add_argument("--seed", type=int, default=d.rng_seed)
    return parser


def _config(args) -> TrainConfig:
    return TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch,
        dropout_rate=args.dropout,
        l2_lambda=args.l2,
        max_epochs=args.epochs,
        patience=args.patience,
        rng_seed=args.seed,
        hard_targets=args.hard_targets,
        embedder=args.embedder,
        hidden_size=args.hidden,
        finetune_embeddings=args.finetune_embeddings,
    )


def _student_input(embedder, embeddings=None, precomputed=None):
    if embedder == "precomp":
        if not precomputed:
            raise ValidationError("--embedder precomp needs --precomputed")
        return load_segment_vectors(precomputed)
    if embedder in ("avg", "att"):
        if not embeddings:
            raise ValidationError(f"--embedder {embedder} needs --embeddings")
        return load_embeddings(embeddings)
    return None


def _inputs(args) -> dict:
    return {
        "corpus": describe_input(args.corpus),
        "lexicon": describe_input(args.lexicon),
        "embeddings": describe_input(args.embeddings) if args.embedder in ("avg", "att") else None,
        "precomputed": describe_input(args.precomputed) if args.embedder == "precomp" else None,
    }


def _write_manifest(out: Path, command: str, args, cfg: TrainConfig, inputs: dict, extra: dict) -> None:
    manifest = {
        "command": command,
        "config": asdict(cfg),
        **extra,
        "inputs": inputs,
        "rng_seed": cfg.rng_seed,
        "tool_version": __version__,
    }
    Path(str(out) + ".manifest.json").write_text(dumps(manifest), encoding="utf-8")


def _fit(args, max_rounds, gamma, warm_start, log_fh=None):
    lex = load_lexicon(args.lexicon, stem=args.stem)
    corpus = load_corpus(args.corpus, lex)
    emb = _student_input(args.embedder, args.embeddings, args.precomputed)
    cfg = _config(args)

    def emit(rec):
        line = rec.log_line()
        print(line, flush=True)
        if log_fh is not None:
            log_fh.write(line + "\n")

    state = run_iswd(corpus, lex, emb, cfg, max_rounds=max_rounds, gamma=gamma, warm_start=warm_start, on_round=emit)
    rounds = [json.loads(rec.log_line()) for rec in state.records]
    cotrain = {"gamma": gamma, "max_rounds": max_rounds, "warm_start": warm_start, "best_round": state.round}
    bundle = ModelBundle(lex, state.quality, state.student, rounds, cotrain, _inputs(args))
    return bundle, cfg, cotrain


def cmd_train(args) -> int:
    bundle, cfg, cotrain = _fit(args, 1, 0.5, False)
    save_model(args.out, bundle)
    _write_manifest(Path(args.out), "train", args, cfg, bundle.inputs, {"cotrain": cotrain})
    return 0


def cmd_cotrain(args) -> int:
    log_path = args.log or args.out + ".rounds.jsonl"
    with open(log_path, "w", encoding="utf-8") as log_fh:
        bundle, cfg, cotrain = _fit(args, args.max_rounds, args.gamma, args.warm_start, log_fh)
    save_model(args.out, bundle)
    _write_manifest(Path(args.out), "cotrain", args, cfg, bundle.inputs, {"cotrain": cotrain})
    return 0


def _recorded(bundle: ModelBundle, key: str, override: str | None):
    if override:
        return override
    entry = bundle.inputs.get(key)
    return entry["path"] if entry else None


def _bundle_predict(bundle: ModelBundle, corpus, args, who: str):
    q = p = None
    if who in ("teacher", "both"):
        q = teacher_predict(encode_corpus(corpus, bundle.lexicon), bundle.lexicon, bundle.quality)
    if who in ("student", "both"):
        student = bundle.student
        emb = _student_input(
            student.embedder,
            _recorded(bundle, "embeddings", getattr(args, "embeddings", None)),
            _recorded(bundle, "precomputed", getattr(args, "precomputed", None)),
        )
        p = student_predict_corpus(corpus, student, emb)
    return q, p


def cmd_predict(args) -> int:
    bundle = load_model(args.model)
    corpus = load_corpus(args.corpus, bundle.lexicon)
    q, p = _bundle_predict(bundle, corpus, args, args.who)
    write_predictions(args.out or sys.stdout, corpus, bundle.lexicon, q, p)
    return 0


def cmd_eval(args) -> int:
    bundle = load_model(args.model) if args.model else None
    if bundle is None and not (args.corpus and args.lexicon):
        raise ValidationError("eval needs --model or --corpus and --lexicon")
    lex = bundle.lexicon if bundle is not None else load_lexicon(args.lexicon, stem=args.stem)
    test = load_corpus(args.test, lex)

    if bundle is not None and args.runs is None:
        q, p = _bundle_predict(bundle, test, args, "both")
        gold = gold_labels(test)
        cm = confusion_matrix(p.argmax(axis=1), gold, lex.K)
        teacher_cm = confusion_matrix(q.argmax(axis=1), gold, lex.K)
        score = micro_f1_from_confusion(cm)
        report = EvalReport(
            micro_f1=score,
            per_class_f1=per_class_f1(cm).tolist(),
            confusion=cm.tolist(),
            n_runs=1,
            f1_mean=score,
            f1_std=0.0,
            run_f1=[score],
            teacher_f1=micro_f1_from_confusion(teacher_cm),
            aspects=list(lex.aspects),
        )
        preds = (test, q, p)
    else:
        if bundle is not None:
            cfg = bundle.student.config
            corpus_path = _recorded(bundle, "corpus", args.corpus)
            emb = _student_input(
                cfg.embedder,
                _recorded(bundle, "embeddings", args.embeddings),
                _recorded(bundle, "precomputed", args.precomputed),
            )
            max_rounds = bundle.cotrain.get("max_rounds", 1)
            gamma = bundle.cotrain.get("gamma", 0.5)
            warm_start = bundle.cotrain.get("warm_start", False)
        else:
            cfg = _config(args)
            corpus_path = args.corpus
            emb = _student_input(cfg.embedder, args.embeddings, args.precomputed)
            max_rounds, gamma, warm_start = args.max_rounds, args.gamma, args.warm_start
        train = load_corpus(corpus_path, lex)
        valid = load_corpus(args.validation, lex) if args.validation else ()
        report, runs = run_protocol(
            Splits(train, test, valid),
            lex,
            emb,
            cfg,
            n_seeds=args.runs or 1,
            ablation=args.ablation,
            max_rounds=max_rounds,
            gamma=gamma,
            warm_start=warm_start,
            return_runs=True,
        )
        q = teacher_predict(encode_corpus(test, lex), lex)
        preds = (test, q, runs[0].test_probs)

    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.predictions:
        write_predictions(args.predictions, preds[0], lex, preds[1], preds[2])
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec(
        K=args.K,
        vocab_size=args.vocab_size,
        n_segments=args.n_segments,
        segment_length=(args.min_length, args.max_length),
        seeds_per_aspect=args.seeds_per_aspect,
        p_seed=args.p_seed,
        noise_frac=args.noise_frac,
        rng_seed=args.seed,
        dim=args.dim,
    )
    paths = generate(spec).write(args.out_dir)
    print(json.dumps({k: str(v) for k, v in paths.items()}))
    return 0


COMMANDS = {"train": cmd_train, "cotrain": cmd_cotrain, "predict": cmd_predict, "eval": cmd_eval, "synth": cmd_synth}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
        return COMMANDS[args.command](args)
    except Exception as exc:  # noqa: BLE001 - reported as JSON with an exit code
        if isinstance(exc, SeedDistillError):
            code = exc.exit_code
        elif isinstance(exc, FileNotFoundError):
            code = ValidationError.exit_code
        else:
            code = 4
        error = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
        sys.stderr.write(json.dumps(error) + "\n")
        return code


if __name__ == "__main__":
    sys.exit(main())
