"""Synthetic labelled corpora with known seed quality.

Every non-General aspect owns a disjoint topical sub-vocabulary whose word
vectors cluster around a random aspect direction; General segments use only the
shared background vocabulary.  A chosen fraction of seed words is *noisy*: the
lexicon files it under one aspect while the generator emits it in segments of
another.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import GENERAL, EmbeddingTable, SeedLexicon, SegmentRecord, write_corpus, write_embeddings, write_lexicon
from .errors import SpecInfeasible


@dataclass(frozen=True)
class SynthSpec:
    K: int = 4
    vocab_size: int = 2000
    n_segments: int = 1000
    segment_length: tuple[int, int] = (8, 16)
    seeds_per_aspect: int = 5
    p_seed: float = 0.5
    noise_frac: float = 0.0
    rng_seed: int = 0
    dim: int = 50
    topic_frac: float = 0.6
    cluster_noise: float = 0.6

    def validate(self) -> None:
        n_aspects = self.K - 1
        if self.K < 2:
            raise SpecInfeasible("need at least one aspect besides General")
        lo, hi = self.segment_length
        if lo < 1 or hi < lo:
            raise SpecInfeasible(f"bad segment_length range {self.segment_length}")
        for name in ("p_seed", "noise_frac", "topic_frac"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise SpecInfeasible(f"{name} must be a probability")
        if self.seeds_per_aspect < 1 or self.n_segments < 0 or self.dim < 1:
            raise SpecInfeasible("seeds_per_aspect, dim must be positive and n_segments non-negative")
        if self.noise_frac > 0 and n_aspects < 2:
            raise SpecInfeasible("noisy seeds need at least two non-General aspects")
        # each aspect needs a topical word and the background needs one word
        if self.seeds_per_aspect * n_aspects + n_aspects + 1 > self.vocab_size:
            raise SpecInfeasible(
                f"vocab_size={self.vocab_size} too small for {n_aspects} aspects x "
                f"{self.seeds_per_aspect} seeds plus topical and background words"
            )


@dataclass
class SynthData:
    corpus: list[SegmentRecord]
    lexicon: SeedLexicon
    embeddings: EmbeddingTable
    seed_truth: dict[str, int]

    @property
    def noisy_seeds(self) -> frozenset[str]:
        return frozenset(s for s, k in self.seed_truth.items() if self.lexicon.owner[s] != k)

    def write(self, outdir) -> dict[str, Path]:
        """Write ``corpus.jsonl``, ``lexicon.json``, ``embeddings.txt`` and ``seed_truth.json``."""
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "corpus": out / "corpus.jsonl",
            "lexicon": out / "lexicon.json",
            "embeddings": out / "embeddings.txt",
            "seed_truth": out / "seed_truth.json",
        }
        write_corpus(paths["corpus"], self.corpus, self.lexicon)
        write_lexicon(paths["lexicon"], self.lexicon)
        write_embeddings(paths["embeddings"], self.embeddings)
        truth = {s: self.lexicon.aspects[k] for s, k in sorted(self.seed_truth.items())}
        paths["seed_truth"].write_text(json.dumps(truth, indent=1) + "\n", encoding="utf-8")
        return paths


def _zipf(n, rng):
    w = 1.0 / np.arange(1, n + 1)
    return rng.permutation(w / w.sum())


def generate(spec: SynthSpec) -> SynthData:
    spec.validate()
    rng = np.random.default_rng(spec.rng_seed)
    K, A, S = spec.K, spec.K - 1, spec.seeds_per_aspect
    V = spec.vocab_size

    # shuffled names so a token's spelling says nothing about its role
    names = [f"w{i:05d}" for i in rng.permutation(V)]
    n_seeds = A * S
    rest = V - n_seeds
    n_topical = max(1, (rest // 2) // A)
    seeds = names[:n_seeds]
    topical = [names[n_seeds + a * n_topical : n_seeds + (a + 1) * n_topical] for a in range(A)]
    background = names[n_seeds + A * n_topical :]

    seed_truth = {s: j // S for j, s in enumerate(seeds)}
    owner = dict(seed_truth)
    n_noisy = int(round(spec.noise_frac * n_seeds))
    for j in rng.choice(n_seeds, size=n_noisy, replace=False):
        s = seeds[j]
        others = [a for a in range(A) if a != seed_truth[s]]
        owner[s] = int(rng.choice(others))
    groups = {f"aspect{a + 1}": [s for s in seeds if owner[s] == a] for a in range(A)}
    groups[GENERAL] = []
    lexicon = SeedLexicon.from_mapping(groups)

    directions = rng.normal(size=(A, spec.dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    vectors = {}
    for a in range(A):
        words = topical[a] + [s for s in seeds if seed_truth[s] == a]
        noise = rng.normal(size=(len(words), spec.dim)) * spec.cluster_noise / np.sqrt(spec.dim)
        vecs = directions[a] + noise
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        vectors.update(zip(words, vecs))
    bg = rng.normal(size=(len(background), spec.dim))
    bg /= np.linalg.norm(bg, axis=1, keepdims=True)
    vectors.update(zip(background, bg))
    emb = EmbeddingTable(names, np.array([vectors[w] for w in names]))

    topic_p = [_zipf(len(t), rng) for t in topical]
    bg_p = _zipf(len(background), rng)
    pools = [[s for s in seeds if seed_truth[s] == a] for a in range(A)]
    lo, hi = spec.segment_length
    corpus = []
    for i in range(spec.n_segments):
        aspect = int(rng.integers(K))
        length = int(rng.integers(lo, hi + 1))
        if aspect == K - 1:
            tokens = list(rng.choice(background, size=length, p=bg_p))
        else:
            from_topic = rng.random(length) < spec.topic_frac
            n_top = int(from_topic.sum())
            top_words = iter(rng.choice(topical[aspect], size=n_top, p=topic_p[aspect]))
            bg_words = iter(rng.choice(background, size=length - n_top, p=bg_p))
            tokens = [next(top_words) if t else next(bg_words) for t in from_topic]
            pool = pools[aspect]
            if pool and rng.random() < spec.p_seed:
                m = min(int(rng.integers(1, 3)), len(pool))
                for s in rng.choice(pool, size=m, replace=False):
                    tokens.insert(int(rng.integers(len(tokens) + 1)), str(s))
        corpus.append(SegmentRecord(f"r{i // 5:05d}", f"r{i // 5:05d}-{i % 5}", tuple(map(str, tokens)), aspect))
    return SynthData(corpus, lexicon, emb, seed_truth)


def split(corpus, test_frac: float = 0.2, valid_frac: float = 0.0):
    """Contiguous train / validation / test split (the generator already shuffles)."""
    n = len(corpus)
    n_test = int(round(n * test_frac))
    n_valid = int(round(n * valid_frac))
    train = corpus[: n - n_test - n_valid]
    valid = corpus[n - n_test - n_valid : n - n_test]
    test = corpus[n - n_test :]
    return train, valid, test
