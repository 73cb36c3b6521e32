"""Micro-F1 scoring, the multi-seed evaluation protocol and ablations."""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .corpus import SeedLexicon, SegmentRecord, encode_corpus, gold_labels
from .cotrain import CotrainState, run_iswd
from .errors import LengthMismatch, MissingGoldLabels, ValidationError
from .student import StudentModel, TrainConfig, student_predict_corpus
from .teacher import SeedQualityTable, teacher_predict

ABLATIONS = ("none", "rsw", "hard_targets", "no_dropout", "no_l2")
L2_GRID = (0.001, 0.01, 0.1)


def confusion_matrix(pred, gold, K: int) -> np.ndarray:
    """``K x K`` counts with gold classes on rows and predictions on columns."""
    pred = np.asarray(pred, dtype=np.int64)
    gold = np.asarray(gold, dtype=np.int64)
    if pred.shape != gold.shape:
        raise LengthMismatch(f"{pred.size} predictions vs {gold.size} gold labels")
    for name, arr in (("prediction", pred), ("gold label", gold)):
        if arr.size and (arr.min() < 0 or arr.max() >= K):
            raise ValidationError(f"{name} outside [0, {K})")
    cm = np.zeros((K, K), dtype=np.int64)
    np.add.at(cm, (gold, pred), 1)
    return cm


def _f1(tp, fp, fn):
    denom = 2 * tp + fp + fn
    return np.divide(2.0 * tp, denom, out=np.zeros_like(denom, dtype=np.float64), where=denom > 0)


def per_class_f1(cm: np.ndarray) -> np.ndarray:
    tp = np.diag(cm)
    return _f1(tp, cm.sum(axis=0) - tp, cm.sum(axis=1) - tp)


def micro_f1_from_confusion(cm: np.ndarray) -> float:
    tp = np.trace(cm)
    total = cm.sum()
    # every wrong decision is one false positive and one false negative
    return float(_f1(np.array(tp), np.array(total - tp), np.array(total - tp)))


def micro_f1(pred, gold, K: int | None = None) -> float:
    """Micro-averaged F1 over all classes (General included)."""
    pred = np.asarray(pred, dtype=np.int64)
    gold = np.asarray(gold, dtype=np.int64)
    if pred.shape != gold.shape:
        raise LengthMismatch(f"{pred.size} predictions vs {gold.size} gold labels")
    if K is None:
        K = int(max(pred.max(initial=-1), gold.max(initial=-1))) + 1
    return micro_f1_from_confusion(confusion_matrix(pred, gold, K))


@dataclass
class EvalReport:
    """Pooled test scores over ``n_runs`` seeds.

    ``confusion`` is summed over runs, so ``micro_f1`` is the pooled score;
    ``f1_mean``/``f1_std`` (population std) summarize the per-run scores in
    ``run_f1``.
    """

    micro_f1: float
    per_class_f1: list[float]
    confusion: list[list[int]]
    n_runs: int
    f1_mean: float
    f1_std: float
    run_f1: list[float] = field(default_factory=list)
    teacher_f1: float | None = None
    ablation: str = "none"
    selected_l2: list[float] = field(default_factory=list)
    aspects: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"


@dataclass
class Splits:
    train: Sequence[SegmentRecord]
    test: Sequence[SegmentRecord]
    validation: Sequence[SegmentRecord] = ()


@dataclass
class RunResult:
    seed: int
    l2: float
    student: StudentModel
    quality: SeedQualityTable
    test_probs: np.ndarray
    test_f1: float
    state: CotrainState = field(repr=False, default=None)


def ablation_config(cfg: TrainConfig, ablation: str) -> TrainConfig:
    if ablation not in ABLATIONS:
        raise ValidationError(f"ablation must be one of {ABLATIONS}, got {ablation!r}")
    if ablation == "hard_targets":
        return replace(cfg, hard_targets=True)
    if ablation == "no_dropout":
        return replace(cfg, dropout_rate=0.0)
    if ablation == "no_l2":
        return replace(cfg, l2_lambda=0.0)
    return cfg


def _has_labels(split) -> bool:
    return len(split) > 0 and all(seg.gold_label is not None for seg in split)


def _one_run(seed, splits: Splits, lex, emb, cfg, ablation, max_rounds, gamma, grid, warm_start) -> RunResult:
    test_gold = gold_labels(splits.test)
    valid_gold = gold_labels(splits.validation) if grid is not None else None
    best = None
    for l2 in grid if grid is not None else [cfg.l2_lambda]:
        run_cfg = replace(cfg, rng_seed=seed, l2_lambda=l2)
        state = run_iswd(
            splits.train,
            lex,
            emb,
            run_cfg,
            max_rounds=max_rounds,
            gamma=gamma,
            warm_start=warm_start,
            mask_student_seeds=ablation == "rsw",
        )
        score = 0.0
        if valid_gold is not None:
            valid_pred = student_predict_corpus(splits.validation, state.student, emb).argmax(axis=1)
            score = micro_f1(valid_pred, valid_gold, lex.K)
        if best is None or score > best[0]:
            best = (score, l2, state)
    _, l2, state = best
    probs = student_predict_corpus(splits.test, state.student, emb)
    f1 = micro_f1(probs.argmax(axis=1), test_gold, lex.K)
    return RunResult(seed, l2, state.student, state.quality, probs, f1, state)


def run_protocol(
    splits: Splits,
    lex: SeedLexicon,
    emb,
    cfg: TrainConfig = TrainConfig(),
    n_seeds: int = 5,
    ablation: str = "none",
    *,
    max_rounds: int = 1,
    gamma: float = 0.5,
    l2_grid: Sequence[float] = L2_GRID,
    warm_start: bool = False,
    workers: int | None = None,
    return_runs: bool = False,
):
    """Train ``n_seeds`` students (seeds 1..n) and score them on the test split.

    If the validation split is fully labelled, each run picks its L2 strength
    from ``l2_grid`` by validation micro-F1 (the ``no_l2`` ablation pins it to 0).
    Under ``rsw`` the student trains and predicts with seed words masked while the
    teacher still sees the original text.
    """
    if not _has_labels(splits.test):
        raise MissingGoldLabels("the test split needs gold labels")
    if n_seeds < 1:
        raise ValidationError("n_seeds must be >= 1")
    cfg = ablation_config(cfg, ablation)
    grid = list(l2_grid) if _has_labels(splits.validation) and ablation != "no_l2" else None

    teacher_probs = teacher_predict(encode_corpus(splits.test, lex), lex)
    test_gold = gold_labels(splits.test)
    teacher_f1 = micro_f1(teacher_probs.argmax(axis=1), test_gold, lex.K)

    seeds = list(range(1, n_seeds + 1))
    args = (splits, lex, emb, cfg, ablation, max_rounds, gamma, grid, warm_start)
    workers = workers or min(n_seeds, os.cpu_count() or 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(lambda s: _one_run(s, *args), seeds))
    else:
        runs = [_one_run(s, *args) for s in seeds]

    cm = sum(confusion_matrix(r.test_probs.argmax(axis=1), test_gold, lex.K) for r in runs)
    scores = np.array([r.test_f1 for r in runs])
    report = EvalReport(
        micro_f1=micro_f1_from_confusion(cm),
        per_class_f1=per_class_f1(cm).tolist(),
        confusion=cm.tolist(),
        n_runs=len(runs),
        f1_mean=float(scores.mean()),
        f1_std=float(scores.std()),
        run_f1=scores.tolist(),
        teacher_f1=teacher_f1,
        ablation=ablation,
        selected_l2=[r.l2 for r in runs],
        aspects=list(lex.aspects),
    )
    return (report, runs) if return_runs else report


def write_predictions(path, corpus, lex: SeedLexicon, q=None, p=None) -> None:
    """CSV of ``segment_id, pred_aspect, gold_aspect, q_vector, p_vector`` to a path or text stream.

    The predicted aspect comes from the student when ``p`` is given, else from
    the teacher.  Missing vectors are written as empty cells.
    """
    if q is None and p is None:
        raise ValidationError("need teacher or student probabilities")
    source = p if p is not None else q
    if hasattr(path, "write"):
        _write_prediction_rows(path, corpus, lex, q, p, source)
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _write_prediction_rows(fh, corpus, lex, q, p, source)


def _write_prediction_rows(fh, corpus, lex, q, p, source):
    writer = csv.writer(fh)
    writer.writerow(["segment_id", "pred_aspect", "gold_aspect", "q_vector", "p_vector"])
    for i, seg in enumerate(corpus):
        gold = "" if seg.gold_label is None else lex.aspects[seg.gold_label]
        writer.writerow(
            [
                seg.segment_id,
                lex.aspects[int(np.argmax(source[i]))],
                gold,
                "" if q is None else json.dumps([float(x) for x in q[i]]),
                "" if p is None else json.dumps([float(x) for x in p[i]]),
            ]
        )
