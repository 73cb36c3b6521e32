"""
Teacher and student on a synthetic review corpus
=================================================

A seed lexicon can only label segments that mention a seed word.  The student
reads every word, so it gets a chance to label the rest.
"""

import numpy as np

from seeddistill import SynthSpec, TrainConfig, encode_corpus, generate, gold_labels, teacher_predict
from seeddistill.evaluation import Splits, micro_f1, run_protocol
from seeddistill.synth import split

# 4 aspects (the last is General), 80% of aspect segments carry a seed word
data = generate(SynthSpec(K=4, n_segments=4000, p_seed=0.8, rng_seed=0))
lex = data.lexicon
print("aspects:", lex.aspects)
print("seeds:  ", {a: list(s) for a, s in zip(lex.aspects, lex.seeds)})
print("one segment:", " ".join(data.corpus[0].tokens), "->", lex.aspects[data.corpus[0].gold_label])

train, valid, test = split(data.corpus, test_frac=0.2, valid_frac=0.1)

# the teacher only counts seed words
q = teacher_predict(encode_corpus(test, lex), lex)
gold = gold_labels(test)
print(f"\nteacher micro-F1 {micro_f1(q.argmax(axis=1), gold, lex.K):.3f}")
print("segments with no seed (teacher says General):", int((encode_corpus(test, lex).sum(axis=1) == 0).sum()), "of", len(test))

# students distilled from the teacher, 3 seeds each, L2 picked on the validation split
for name, cfg in [("soft targets", TrainConfig()), ("hard targets", TrainConfig(hard_targets=True))]:
    report = run_protocol(Splits(train, test, valid), lex, data.embeddings, cfg, n_seeds=3)
    print(f"student ({name}) micro-F1 {report.f1_mean:.3f} +/- {report.f1_std:.3f}  l2={report.selected_l2}")

# with only half the aspect segments seeded, General owns most of the teacher's mass
# and a student that matches the teacher learns to say General too
half = generate(SynthSpec(K=4, n_segments=4000, p_seed=0.5, rng_seed=0))
tr, va, te = split(half.corpus, test_frac=0.2, valid_frac=0.1)
report = run_protocol(Splits(tr, te, va), half.lexicon, half.embeddings, TrainConfig(), n_seeds=3)
print(f"\np_seed=0.5: teacher {report.teacher_f1:.3f}, student {report.f1_mean:.3f}")
print("student predicted-class counts:", np.array(report.confusion).sum(axis=0))
