"""Iterative seed-word distillation: alternate teacher, student and seed-quality updates."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .corpus import EmbeddingTable, SeedLexicon, SegmentRecord, encode_corpus
from .errors import EmptyCorpus, LengthMismatch
from .student import StudentModel, TrainConfig, hard_label, student_predict_corpus, train_student
from .teacher import SeedQualityTable, estimate_quality, interpolate_quality, teacher_predict

logger = logging.getLogger(__name__)


def disagreement_rate(p_hard, q_hard) -> float:
    """Fraction of positions where two label sequences differ."""
    p_hard = np.asarray(p_hard)
    q_hard = np.asarray(q_hard)
    if p_hard.shape != q_hard.shape:
        raise LengthMismatch(f"label sequences differ in length: {p_hard.shape} vs {q_hard.shape}")
    if p_hard.size == 0:
        return 0.0
    return float(np.mean(p_hard != q_hard))


@dataclass
class RoundRecord:
    """Everything produced in one round.

    ``quality`` is the table the teacher used this round; ``updated_quality`` is
    the interpolated estimate handed to the next round (None for the last round).
    """

    round: int
    lr: float
    quality: SeedQualityTable
    teacher_probs: np.ndarray
    student: StudentModel
    student_hard: np.ndarray
    disagreement: float
    train_loss: float
    estimated_quality: SeedQualityTable | None = None
    updated_quality: SeedQualityTable | None = None

    def log_line(self) -> str:
        return json.dumps(
            {"round": self.round, "disagreement": self.disagreement, "train_loss": self.train_loss, "lr": self.lr}
        )


@dataclass
class CotrainState:
    """Best round (lowest disagreement) plus the full history."""

    round: int
    quality: SeedQualityTable
    student: StudentModel
    disagreement_history: list[float]
    lr_schedule: list[float]
    records: list[RoundRecord] = field(default_factory=list, repr=False)

    @property
    def disagreement(self) -> float:
        return self.disagreement_history[self.round]


def run_iswd(
    corpus: Sequence[SegmentRecord],
    lex: SeedLexicon,
    emb: EmbeddingTable | None,
    cfg: TrainConfig = TrainConfig(),
    max_rounds: int = 5,
    gamma: float = 0.5,
    *,
    warm_start: bool = False,
    mask_student_seeds: bool = False,
    on_round: Callable[[RoundRecord], None] | None = None,
) -> CotrainState:
    """Co-train teacher and student until their disagreement stops decreasing.

    Each round applies the teacher with the current seed-quality table, trains a
    student on its soft predictions (learning rate divided by 10 per round),
    labels the training segments with the student, and, if another round follows,
    re-estimates seed quality and interpolates it with the previous table.  The
    loop ends once a round fails to lower the disagreement (or reaches zero) or
    after ``max_rounds``; the round with the lowest disagreement is returned.
    """
    if len(corpus) == 0:
        raise EmptyCorpus("co-training needs a non-empty corpus")
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    counts = encode_corpus(corpus, lex)
    quality = SeedQualityTable.initial(lex)
    mask_lex = lex if mask_student_seeds else None
    records: list[RoundRecord] = []
    previous: StudentModel | None = None

    for r in range(max_rounds):
        lr = cfg.learning_rate / 10**r
        q = teacher_predict(counts, lex, quality)
        student = train_student(
            corpus,
            q,
            emb,
            replace(cfg, learning_rate=lr),
            mask_lexicon=mask_lex,
            init=previous if warm_start else None,
        )
        t = hard_label(student_predict_corpus(corpus, student, emb))
        dis = disagreement_rate(t, hard_label(q))
        loss = student.loss_history[-1] if student.loss_history else float("nan")
        rec = RoundRecord(r, lr, quality, q, student, t, dis, loss)
        records.append(rec)
        logger.info(rec.log_line())

        stop = r + 1 >= max_rounds or dis == 0.0 or (r > 0 and dis >= records[r - 1].disagreement)
        if not stop:
            rec.estimated_quality = estimate_quality(counts, t, lex.K)
            rec.updated_quality = interpolate_quality(quality, rec.estimated_quality, gamma)
            quality = rec.updated_quality
        if on_round is not None:
            on_round(rec)
        previous = student
        if stop:
            break

    history = [rec.disagreement for rec in records]
    best = records[int(np.argmin(history))]
    return CotrainState(best.round, best.quality, best.student, history, [rec.lr for rec in records], records)
