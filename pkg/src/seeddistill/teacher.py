"""Bag-of-seed-words teacher and the unsupervised seed-quality update.

Aspect indices are 0-based throughout; the General aspect is ``K - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import SeedLexicon
from .errors import DimensionMismatch, GammaOutOfRange, LengthMismatch, ValidationError


@dataclass(frozen=True)
class SeedQualityTable:
    """Per-seed aspect-association weights.

    ``z`` is ``D x K``.  ``observed[j]`` is False for rows that an estimate could
    not fill because seed ``j`` never occurred; those rows are ignored by
    :func:`interpolate_quality`.
    """

    z: np.ndarray
    observed: np.ndarray

    def __post_init__(self):
        z = np.array(self.z, dtype=np.float64)
        observed = np.array(self.observed, dtype=bool)
        if z.ndim != 2 or observed.shape != (z.shape[0],):
            raise DimensionMismatch(f"quality table shape {z.shape} vs observed {observed.shape}")
        if np.any(z < 0):
            raise ValidationError("seed quality weights must be non-negative")
        z.setflags(write=False)
        observed.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "observed", observed)

    @classmethod
    def initial(cls, lex: SeedLexicon) -> "SeedQualityTable":
        """One-hot rows on each seed's own aspect: the unweighted teacher."""
        return cls(lex.owner_matrix(), np.ones(lex.D, dtype=bool))

    @property
    def shape(self) -> tuple[int, int]:
        return self.z.shape

    def owner_weights(self, lex: SeedLexicon) -> np.ndarray:
        """``z[j, owner(j)]`` for every seed, the only component scoring uses."""
        return self.z[np.arange(lex.D), lex.owner_array()]

    def to_dict(self) -> dict:
        return {"z": self.z.tolist(), "observed": self.observed.tolist()}

    @classmethod
    def from_dict(cls, obj: dict) -> "SeedQualityTable":
        z = np.array(obj["z"], dtype=np.float64)
        if z.size == 0:
            z = z.reshape(0, 0)
        return cls(z, np.array(obj["observed"], dtype=bool))


def softmax(scores: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = scores - scores.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def aspect_scores(counts: np.ndarray, lex: SeedLexicon, quality: SeedQualityTable | None = None) -> np.ndarray:
    """Quality-weighted seed counts summed per owner aspect, shape ``(..., K)``."""
    counts = np.asarray(counts)
    if quality is None:
        quality = SeedQualityTable.initial(lex)
    if counts.shape[-1] != lex.D:
        raise DimensionMismatch(f"count vector has length {counts.shape[-1]}, lexicon has D={lex.D}")
    if quality.shape != (lex.D, lex.K):
        raise DimensionMismatch(f"quality table is {quality.shape}, expected {(lex.D, lex.K)}")
    weighted = counts * quality.owner_weights(lex)
    return weighted @ lex.owner_matrix()


def teacher_predict(counts: np.ndarray, lex: SeedLexicon, quality: SeedQualityTable | None = None) -> np.ndarray:
    """Teacher aspect distribution for one count vector or a stacked ``N x D`` matrix.

    Segments without any seed occurrence get all mass on General.  Otherwise the
    result is the softmax of :func:`aspect_scores`; with the initial quality table
    that is the softmax of raw per-aspect seed counts.
    """
    counts = np.asarray(counts)
    probs = softmax(aspect_scores(counts, lex, quality))
    empty = counts.sum(axis=-1) == 0
    if np.any(empty):
        fallback = np.zeros(lex.K)
        fallback[lex.general] = 1.0
        probs = np.where(empty[..., None], fallback, probs)
    return probs


def hard_labels(probs: np.ndarray) -> np.ndarray:
    """Row-wise argmax; ``np.argmax`` already breaks ties towards the lowest index."""
    return np.argmax(probs, axis=-1)


def estimate_quality(counts: np.ndarray, student_hard, K: int) -> SeedQualityTable:
    """Fraction of segments containing each seed that the student assigns to each aspect.

    Seeds that never occur get a zero row flagged as unobserved.
    """
    counts = np.asarray(counts)
    labels = np.asarray(student_hard, dtype=np.int64)
    if counts.ndim != 2:
        raise DimensionMismatch("expected an N x D count matrix")
    if counts.shape[0] != labels.shape[0]:
        raise LengthMismatch(f"{counts.shape[0]} segments but {labels.shape[0]} student labels")
    if labels.size and (labels.min() < 0 or labels.max() >= K):
        raise ValidationError(f"student labels must lie in [0, {K})")
    present = (counts > 0).astype(np.float64)
    onehot = np.zeros((labels.size, K))
    onehot[np.arange(labels.size), labels] = 1.0
    tallies = present.T @ onehot
    totals = tallies.sum(axis=1)
    observed = totals > 0
    z = np.divide(tallies, totals[:, None], out=np.zeros_like(tallies), where=observed[:, None])
    return SeedQualityTable(z, observed)


def interpolate_quality(old: SeedQualityTable, new: SeedQualityTable, gamma: float) -> SeedQualityTable:
    """Move observed rows a fraction ``gamma`` of the way from ``old`` to ``new``."""
    if not 0.0 <= gamma <= 1.0:
        raise GammaOutOfRange(f"gamma must be in [0, 1], got {gamma}")
    if old.shape != new.shape:
        raise DimensionMismatch(f"quality tables differ in shape: {old.shape} vs {new.shape}")
    mixed = (1.0 - gamma) * old.z + gamma * new.z
    z = np.where(new.observed[:, None], mixed, old.z)
    return SeedQualityTable(z, old.observed | new.observed)
