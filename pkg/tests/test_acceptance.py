"""Acceptance criteria, one test each.  Every test records a PASS/FAIL line that
is printed in the terminal summary, then asserts."""

import math
import os
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from seeddistill import cli
from seeddistill.corpus import SeedLexicon, encode_corpus, gold_labels, load_corpus, load_embeddings, load_lexicon
from seeddistill.evaluation import Splits, micro_f1, run_protocol
from seeddistill.student import TrainConfig, objective, student_predict_corpus
from seeddistill.synth import SynthSpec, generate, split
from seeddistill.teacher import SeedQualityTable, estimate_quality, teacher_predict

pytestmark = pytest.mark.acceptance


def record(n, ok, detail):
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


# 1 ---------------------------------------------------------------------------


def brute_teacher(c, z, owner, K):
    if sum(c) == 0:
        return [1.0 if k == K - 1 else 0.0 for k in range(K)]
    scores = [0.0] * K
    for j, count in enumerate(c):
        scores[owner[j]] += count * z[j][owner[j]]
    top = max(scores)
    e = [math.exp(s - top) for s in scores]
    return [v / sum(e) for v in e]


def _random_lexicon(rng, K, D):
    owners = rng.integers(0, K, D)
    groups = {f"a{k}": [f"s{j}" for j in range(D) if owners[j] == k] for k in range(K - 1)}
    groups["General"] = [f"s{j}" for j in range(D) if owners[j] == K - 1]
    return SeedLexicon.from_mapping(groups)


def test_c1_teacher_oracle():
    rng = np.random.default_rng(101)
    cases = []
    for _ in range(1000):
        K, D = int(rng.integers(2, 6)), int(rng.integers(1, 21))
        lex = _random_lexicon(rng, K, D)
        c = rng.integers(0, 4, D) * (rng.random(D) < 0.5)
        z = rng.random((D, K)) * 3
        cases.append((lex, c, z))
    start = time.perf_counter()
    worst = 0.0
    for lex, c, z in cases:
        got = teacher_predict(c, lex, SeedQualityTable(z, np.ones(lex.D, bool)))
        want = brute_teacher(c.tolist(), z.tolist(), lex.owner_array().tolist(), lex.K)
        worst = max(worst, float(np.abs(got - np.array(want)).max()))
    elapsed = time.perf_counter() - start
    ok = record(1, worst <= 1e-9 and elapsed < 1.0, f"max |diff| {worst:.2e} over 1000 instances, {elapsed:.2f}s")
    assert ok


# 2 ---------------------------------------------------------------------------


def naive_quality(counts, labels, K):
    N, D = len(counts), len(counts[0]) if counts else 0
    z = [[0.0] * K for _ in range(D)]
    observed = [False] * D
    for j in range(D):
        total = 0
        tally = [0] * K
        for i in range(N):
            if counts[i][j] > 0:
                total += 1
                tally[labels[i]] += 1
        if total:
            observed[j] = True
            z[j] = [t / total for t in tally]
    return z, observed


def test_c2_quality_oracle():
    rng = np.random.default_rng(202)
    cases = []
    for _ in range(200):
        N, D, K = int(rng.integers(1, 51)), int(rng.integers(1, 15)), int(rng.integers(2, 6))
        counts = rng.integers(0, 3, (N, D)) * (rng.random((N, D)) < 0.3)
        cases.append((counts, rng.integers(0, K, N), K))
    start = time.perf_counter()
    exact = True
    for counts, labels, K in cases:
        est = estimate_quality(counts, labels, K)
        z, observed = naive_quality(counts.tolist(), labels.tolist(), K)
        exact &= est.z.tolist() == z and est.observed.tolist() == observed
    elapsed = time.perf_counter() - start
    ok = record(2, exact and elapsed < 1.0, f"exact match on 200 corpora: {exact}, {elapsed:.2f}s")
    assert ok


# 3 ---------------------------------------------------------------------------


def test_c3_gradient_check():
    rng = np.random.default_rng(303)
    eps = 1e-5
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        B, L, d, K = int(rng.integers(1, 6)), int(rng.integers(1, 7)), int(rng.integers(1, 9)), int(rng.integers(2, 5))
        X = rng.normal(size=(B, L, d))
        mask = np.zeros((B, L), bool)
        for b in range(B):
            mask[b, : rng.integers(1, L + 1)] = True
        targets = rng.dirichlet(np.ones(K), size=B)
        params = {"W": rng.normal(size=(K, d)), "b": rng.normal(size=K), "M": rng.normal(size=(d, d)) * 0.3}
        l2 = float(rng.choice([0.0, 0.01, 0.1]))
        _, grads = objective(params, targets, l2, X=X, mask=mask)
        for name in ("W", "b", "M"):
            arr = params[name]
            num = np.zeros_like(arr)
            for i in np.ndindex(arr.shape):
                old = arr[i]
                arr[i] = old + eps
                up = objective(params, targets, l2, X=X, mask=mask)[0]
                arr[i] = old - eps
                down = objective(params, targets, l2, X=X, mask=mask)[0]
                arr[i] = old
                num[i] = (up - down) / (2 * eps)
            denom = max(np.linalg.norm(num) + np.linalg.norm(grads[name]), 1e-12)
            worst = max(worst, float(np.linalg.norm(num - grads[name]) / denom))
    elapsed = time.perf_counter() - start
    ok = record(3, worst < 1e-4 and elapsed < 5.0, f"max relative error {worst:.2e} on 100 instances, {elapsed:.2f}s")
    assert ok


# shared synthetic corpora for 4-7 ------------------------------------------------------


def _splits(data):
    train, valid, test = split(data.corpus, test_frac=0.2, valid_frac=0.1)
    return Splits(train, test, valid)


@pytest.fixture(scope="module")
def clean():
    data = generate(SynthSpec(K=4, n_segments=10_000, p_seed=0.5, noise_frac=0.0))
    return data, _splits(data)


@pytest.fixture(scope="module")
def noisy():
    data = generate(SynthSpec(K=4, n_segments=10_000, p_seed=0.5, noise_frac=0.3))
    return data, _splits(data)


# 4 ---------------------------------------------------------------------------


@pytest.mark.slow
def test_c4_student_beats_teacher(clean):
    data, splits = clean
    start = time.perf_counter()
    report = run_protocol(splits, data.lexicon, data.embeddings, TrainConfig(embedder="avg"), n_seeds=5)
    elapsed = time.perf_counter() - start
    gap = report.f1_mean - report.teacher_f1
    ok = record(
        4,
        gap >= 0.05 and elapsed < 120,
        f"student {report.f1_mean:.4f} vs teacher {report.teacher_f1:.4f} (gap {100 * gap:+.2f} pts, need +5), {elapsed:.1f}s",
    )
    assert ok


# 5 ---------------------------------------------------------------------------


def _substitute_seeds(corpus, lex, rng):
    swapped = []
    for seg in corpus:
        tokens = tuple(str(rng.choice(lex.seed_list)) if t in lex.owner else t for t in seg.tokens)
        swapped.append(replace(seg, tokens=tokens))
    return swapped


@pytest.mark.slow
def test_c5_rsw(clean):
    data, splits = clean
    lex = data.lexicon
    start = time.perf_counter()
    report, runs = run_protocol(splits, lex, data.embeddings, TrainConfig(), n_seeds=5, ablation="rsw", return_runs=True)
    elapsed = time.perf_counter() - start
    gap = report.f1_mean - report.teacher_f1

    rng = np.random.default_rng(5)
    seeded = [s for s in splits.test if any(t in lex.owner for t in s.tokens)]
    swapped = _substitute_seeds(seeded, lex, rng)
    dropped = [replace(s, tokens=tuple("UNK" if t in lex.owner else t for t in s.tokens)) for s in seeded]
    invariant = all(
        np.array_equal(student_predict_corpus(seeded, r.student, data.embeddings), student_predict_corpus(alt, r.student, data.embeddings))
        for r in runs
        for alt in (swapped, dropped)
    )
    ok = record(
        5,
        gap >= 0.02 and invariant and elapsed < 120,
        f"rsw student {report.f1_mean:.4f} vs teacher {report.teacher_f1:.4f} (gap {100 * gap:+.2f} pts, need +2), "
        f"seed substitution invariant on {len(seeded)} segments x 5 runs: {invariant}, {elapsed:.1f}s",
    )
    assert ok


# 6 and 7 ----------------------------------------------------------------------------


@pytest.fixture(scope="module")
def noisy_runs(noisy):
    data, splits = noisy
    start = time.perf_counter()
    _, runs = run_protocol(splits, data.lexicon, data.embeddings, TrainConfig(), n_seeds=5, max_rounds=2, return_runs=True)
    return runs, time.perf_counter() - start


@pytest.mark.slow
def test_c6_cotrain_repairs_noisy_seeds(noisy, noisy_runs):
    data, splits = noisy
    runs, elapsed = noisy_runs
    lex = data.lexicon
    counts = encode_corpus(splits.test, lex)
    gold = gold_labels(splits.test)
    hits, details = 0, []
    for run in runs:
        recs = run.state.records
        f0 = micro_f1(teacher_predict(counts, lex, recs[0].quality).argmax(axis=1), gold, lex.K)
        if len(recs) < 2:
            details.append(f"seed {run.seed}: stopped after round 0")
            continue
        f1 = micro_f1(teacher_predict(counts, lex, recs[1].quality).argmax(axis=1), gold, lex.K)
        d0, d1 = recs[0].disagreement, recs[1].disagreement
        hit = f1 - f0 >= 0.03 and d1 < d0
        hits += hit
        details.append(f"seed {run.seed}: teacher {f0:.4f}->{f1:.4f}, disagreement {d0:.4f}->{d1:.4f}")
    ok = record(6, hits >= 4 and elapsed < 300, f"{hits}/5 seeds improve (need 4); " + "; ".join(details) + f"; {elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_c7_noisy_weight_separation(noisy, noisy_runs):
    data, _ = noisy
    runs, elapsed = noisy_runs
    lex = data.lexicon
    noisy_mask = np.array([s in data.noisy_seeds for s in lex.seed_list])
    clean_w, noisy_w = [], []
    for run in runs:
        updated = run.state.records[0].updated_quality
        w = (updated if updated is not None else run.state.records[0].quality).owner_weights(lex)
        clean_w.append(w[~noisy_mask].mean())
        noisy_w.append(w[noisy_mask].mean())
    c, n = float(np.mean(clean_w)), float(np.mean(noisy_w))
    ok = record(7, c > n and elapsed < 300, f"mean owner weight clean {c:.4f} vs noisy {n:.4f}, {elapsed:.1f}s")
    assert ok


# 8 ---------------------------------------------------------------------------


def test_c8_micro_f1_is_accuracy():
    rng = np.random.default_rng(808)
    mismatches = 0
    for _ in range(1000):
        n, K = int(rng.integers(1, 200)), int(rng.integers(2, 8))
        pred, gold = rng.integers(0, K, n), rng.integers(0, K, n)
        mismatches += micro_f1(pred, gold, K) != np.mean(pred == gold)
    ok = record(8, mismatches == 0, f"{mismatches} mismatches in 1000 random label vectors")
    assert ok


# 9 ---------------------------------------------------------------------------


def test_c9_cotrain_is_deterministic(tmp_path, capsys):
    data = generate(SynthSpec(n_segments=600, vocab_size=400, dim=16, noise_frac=0.2))
    paths = data.write(tmp_path / "in")
    common = ["cotrain", "--corpus", str(paths["corpus"]), "--lexicon", str(paths["lexicon"]), "--embeddings", str(paths["embeddings"]), "--max-rounds", "3", "--seed", "7"]
    outs = []
    for name in ("a", "b"):
        out = tmp_path / f"{name}.model.json"
        assert cli.main([*common, "--out", str(out)]) == 0
        outs.append(out)
    capsys.readouterr()
    same_model = outs[0].read_bytes() == outs[1].read_bytes()
    same_manifest = Path(f"{outs[0]}.manifest.json").read_bytes() == Path(f"{outs[1]}.manifest.json").read_bytes()
    ok = record(9, same_model and same_manifest, f"manifests identical: {same_manifest}, model files byte-identical: {same_model}")
    assert ok


# 10 ----------------------------------------------------------------------------

OPOSUM = os.environ.get("SEEDDISTILL_OPOSUM_DIR")


@pytest.mark.skipif(not OPOSUM, reason="set SEEDDISTILL_OPOSUM_DIR to run the real-data check")
def test_c10_real_data():
    """Expects ``<domain>/{train,test}.jsonl``, ``<domain>/lexicon.json`` and ``embeddings.txt``."""
    root = Path(OPOSUM)
    emb = load_embeddings(root / "embeddings.txt")
    teacher, student = [], []
    for domain in sorted(p for p in root.iterdir() if p.is_dir()):
        lex = load_lexicon(domain / "lexicon.json")
        train = load_corpus(domain / "train.jsonl", lex)
        test = load_corpus(domain / "test.jsonl", lex)
        report = run_protocol(Splits(train, test), lex, emb, TrainConfig(), n_seeds=5)
        teacher.append(report.teacher_f1)
        student.append(report.f1_mean)
    t, s = 100 * np.mean(teacher), 100 * np.mean(student)
    ok = record(10, abs(t - 52.2) <= 0.5 and abs(s - 58.7) <= 1.5, f"teacher {t:.1f} (target 52.2), student {s:.1f} (target 58.7)")
    assert ok
