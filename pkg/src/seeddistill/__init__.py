"""Weakly supervised segment classification from seed-word lexicons.

A bag-of-seed-words teacher labels unlabelled segments softly, an embedding
student is distilled from it, and iterative co-training re-weights noisy seeds.
"""

__version__ = "0.1.0"

from .corpus import (
    EmbeddingTable,
    SeedLexicon,
    SegmentRecord,
    SegmentVectors,
    encode_bosw,
    encode_corpus,
    gold_labels,
    load_corpus,
    load_embeddings,
    load_lexicon,
    load_segment_vectors,
    mask_seed_words,
    tokenize,
)
from .cotrain import CotrainState, disagreement_rate, run_iswd
from .evaluation import EvalReport, Splits, micro_f1, run_protocol
from .student import (
    StudentModel,
    TrainConfig,
    classify,
    distill_loss,
    embed,
    hard_label,
    student_predict,
    student_predict_corpus,
    train_student,
)
from .synth import SynthSpec, generate
from .teacher import SeedQualityTable, estimate_quality, interpolate_quality, teacher_predict
