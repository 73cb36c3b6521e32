"""
Removing seed words from the student's input
============================================

Under the rsw ablation the student sees "UNK" wherever a seed word was, during
training and prediction.  It can only learn from the surrounding words.
"""

import numpy as np

from seeddistill import SynthSpec, TrainConfig, generate, student_predict_corpus
from seeddistill.evaluation import Splits, run_protocol
from seeddistill.synth import split

data = generate(SynthSpec(K=4, n_segments=4000, p_seed=0.8, rng_seed=2))
lex = data.lexicon
train, valid, test = split(data.corpus, test_frac=0.2, valid_frac=0.1)
splits = Splits(train, test, valid)
cfg = TrainConfig(hard_targets=True)

full = run_protocol(splits, lex, data.embeddings, cfg, n_seeds=3)
rsw, runs = run_protocol(splits, lex, data.embeddings, cfg, n_seeds=3, ablation="rsw", return_runs=True)
print(f"teacher               {full.teacher_f1:.3f}")
print(f"student               {full.f1_mean:.3f}")
print(f"student, seeds masked {rsw.f1_mean:.3f}")

# swapping one seed word for another leaves the masked student's output unchanged
seg = next(s for s in test if any(t in lex.owner for t in s.tokens))
other = tuple(lex.seed_list[0] if t in lex.owner else t for t in seg.tokens)
p1 = student_predict_corpus([seg], runs[0].student, data.embeddings)
p2 = student_predict_corpus([seg.__class__(seg.review_id, seg.segment_id, other)], runs[0].student, data.embeddings)
print("\n", " ".join(seg.tokens))
print(" ", " ".join(other))
print("identical predictions:", np.array_equal(p1, p2))
