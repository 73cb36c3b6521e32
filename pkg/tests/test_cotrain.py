from dataclasses import replace

import numpy as np
import pytest

from seeddistill.corpus import SegmentRecord, encode_corpus
from seeddistill.cotrain import disagreement_rate, run_iswd
from seeddistill.errors import EmptyCorpus, LengthMismatch
from seeddistill.student import TrainConfig, train_student
from seeddistill.synth import SynthSpec, generate
from seeddistill.teacher import SeedQualityTable, teacher_predict

FAST = TrainConfig(max_epochs=4, patience=2)


@pytest.fixture(scope="module")
def small():
    return generate(SynthSpec(n_segments=400, vocab_size=300, p_seed=0.8, dim=16, rng_seed=3))


def test_disagreement_rate():
    assert disagreement_rate([0, 1, 2, 2], [0, 1, 1, 0]) == 0.5
    assert disagreement_rate([1, 1], [1, 1]) == 0.0
    assert disagreement_rate([], []) == 0.0
    with pytest.raises(LengthMismatch):
        disagreement_rate([0], [0, 1])


def test_single_round_is_plain_distillation(small):
    state = run_iswd(small.corpus, small.lexicon, small.embeddings, FAST, max_rounds=1)
    q = teacher_predict(encode_corpus(small.corpus, small.lexicon), small.lexicon)
    direct = train_student(small.corpus, q, small.embeddings, FAST)
    assert state.round == 0 and len(state.records) == 1
    for name, value in direct.params.items():
        assert np.array_equal(state.student.params[name], value)
    assert state.records[0].updated_quality is None


def test_round_zero_uses_plain_teacher(small):
    state = run_iswd(small.corpus, small.lexicon, small.embeddings, FAST, max_rounds=3)
    rec = state.records[0]
    assert np.array_equal(rec.quality.z, SeedQualityTable.initial(small.lexicon).z)
    assert np.array_equal(rec.teacher_probs, teacher_predict(encode_corpus(small.corpus, small.lexicon), small.lexicon))


def test_returns_lowest_disagreement_round(small):
    state = run_iswd(small.corpus, small.lexicon, small.embeddings, FAST, max_rounds=4)
    assert state.disagreement == min(state.disagreement_history)
    assert state.student is state.records[state.round].student
    assert state.quality is state.records[state.round].quality


def test_stopping_rule(small):
    state = run_iswd(small.corpus, small.lexicon, small.embeddings, FAST, max_rounds=6)
    h = state.disagreement_history
    # every round but the last strictly improved and was non-zero
    for r in range(1, len(h) - 1):
        assert h[r] < h[r - 1]
    assert all(v > 0 for v in h[:-1])
    if len(h) < 6:
        assert h[-1] == 0 or h[-1] >= h[-2]


def test_learning_rate_schedule(small):
    state = run_iswd(small.corpus, small.lexicon, small.embeddings, replace(FAST, learning_rate=0.01), max_rounds=3)
    assert state.lr_schedule == pytest.approx([0.01, 0.001, 0.0001][: len(state.lr_schedule)])


def test_quality_handoff(small):
    state = run_iswd(small.corpus, small.lexicon, small.embeddings, FAST, max_rounds=3, gamma=0.25)
    for prev, rec in zip(state.records, state.records[1:]):
        assert rec.quality is prev.updated_quality
        expected = np.where(
            prev.estimated_quality.observed[:, None], 0.75 * prev.quality.z + 0.25 * prev.estimated_quality.z, prev.quality.z
        )
        assert np.allclose(rec.quality.z, expected)


def test_agreeing_corpus_stops_after_one_round(small):
    # no seeds anywhere: the teacher says General everywhere and the student learns the same
    corpus = [SegmentRecord("r", f"s{i}", ("nothing", "here")) for i in range(30)]
    cfg = replace(FAST, max_epochs=20, learning_rate=0.1)
    state = run_iswd(corpus, small.lexicon, small.embeddings, cfg, max_rounds=5)
    assert state.disagreement_history == [0.0]
    assert state.records[0].updated_quality is None


def test_round_callback_and_log_line(small):
    seen = []
    state = run_iswd(small.corpus, small.lexicon, small.embeddings, FAST, max_rounds=2, on_round=seen.append)
    assert [r.round for r in seen] == list(range(len(state.records)))
    assert set(__import__("json").loads(seen[0].log_line())) == {"round", "disagreement", "train_loss", "lr"}


def test_warm_start_changes_later_rounds(small):
    cold = run_iswd(small.corpus, small.lexicon, small.embeddings, FAST, max_rounds=2)
    warm = run_iswd(small.corpus, small.lexicon, small.embeddings, FAST, max_rounds=2, warm_start=True)
    assert np.array_equal(cold.records[0].student.params["W"], warm.records[0].student.params["W"])
    if len(cold.records) > 1 and len(warm.records) > 1:
        assert not np.array_equal(cold.records[1].student.params["W"], warm.records[1].student.params["W"])


def test_empty_corpus(small):
    with pytest.raises(EmptyCorpus):
        run_iswd([], small.lexicon, small.embeddings)


@pytest.mark.slow
def test_noisy_seeds_lose_weight():
    data = generate(SynthSpec(n_segments=4000, p_seed=0.8, noise_frac=0.3, rng_seed=11))
    cfg = TrainConfig(hard_targets=True, l2_lambda=0.001, rng_seed=1)
    state = run_iswd(data.corpus, data.lexicon, data.embeddings, cfg, max_rounds=2)
    assert len(state.records) == 2
    w = state.records[1].quality.owner_weights(data.lexicon)
    noisy = np.array([s in data.noisy_seeds for s in data.lexicon.seed_list])
    assert w[~noisy].mean() > w[noisy].mean() + 0.1
