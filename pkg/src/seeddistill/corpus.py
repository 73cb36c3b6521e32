"""Corpus, lexicon and embedding ingestion.

Segments arrive pre-split as JSON lines.  Seed words and corpus text go through
the same :func:`tokenize` so that seeds can be matched token by token.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateSeed,
    MissingGeneral,
    MissingGoldLabels,
    MultiTokenSeed,
    ParseError,
    ReservedToken,
    ValidationError,
)

logger = logging.getLogger(__name__)

UNK = "UNK"
GENERAL = "General"

_TOKEN_RE = re.compile(r"[^\W_]+")
_SUFFIXES = ("ing", "ies", "ed", "es", "ly", "s")
_MIN_STEM = 3
_SIBILANTS = ("s", "x", "z", "ch", "sh")


def _stem_once(token: str) -> str:
    for suffix in _SUFFIXES:
        if token.endswith(suffix) and len(token) - len(suffix) >= _MIN_STEM:
            if suffix == "s" and token.endswith("ss"):
                continue
            if suffix == "es" and not token[:-2].endswith(_SIBILANTS):
                continue
            if suffix == "ies":
                return token[: -len(suffix)] + "y"
            return token[: -len(suffix)]
    return token


def stem(token: str) -> str:
    """Strip common English suffixes until none applies (so stemming is idempotent)."""
    while True:
        shorter = _stem_once(token)
        if shorter == token:
            return token
        token = shorter


def tokenize(text: str, stem_tokens: bool = False) -> list[str]:
    """Lowercase ``text`` and split it on whitespace and punctuation.

    >>> tokenize("The price was GREAT!")
    ['the', 'price', 'was', 'great']
    """
    tokens = _TOKEN_RE.findall(text.lower())
    if stem_tokens:
        tokens = [stem(t) for t in tokens]
    return tokens


@dataclass(frozen=True)
class SeedLexicon:
    """Ordered aspects with disjoint seed sets; the last aspect is General."""

    aspects: tuple[str, ...]
    seeds: tuple[tuple[str, ...], ...]
    stem: bool = False
    seed_list: tuple[str, ...] = field(init=False, repr=False)
    owner: Mapping[str, int] = field(init=False, repr=False)
    index: Mapping[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.aspects) != len(self.seeds):
            raise ValidationError("aspects and seed sets differ in length")
        if not self.aspects or self.aspects[-1] != GENERAL:
            raise MissingGeneral(f"last aspect must be {GENERAL!r}, got {self.aspects[-1:]!r}")
        if len(set(self.aspects)) != len(self.aspects):
            raise ValidationError("aspect names must be unique")
        owner: dict[str, int] = {}
        flat: list[str] = []
        for k, group in enumerate(self.seeds):
            for seed in group:
                if not seed:
                    raise ValidationError(f"empty seed word in aspect {self.aspects[k]!r}")
                if seed.upper() == UNK:
                    raise ReservedToken(f"{UNK!r} is reserved for masking and cannot be a seed")
                if tokenize(seed, self.stem) != [seed]:
                    raise MultiTokenSeed(f"seed {seed!r} is not a single normalized token")
                if seed in owner:
                    if owner[seed] == k:
                        raise DuplicateSeed(f"seed {seed!r} listed twice in {self.aspects[k]!r}")
                    raise DuplicateSeed(
                        f"seed {seed!r} appears in both {self.aspects[owner[seed]]!r} "
                        f"and {self.aspects[k]!r}"
                    )
                owner[seed] = k
                flat.append(seed)
        object.__setattr__(self, "seed_list", tuple(flat))
        object.__setattr__(self, "owner", owner)
        object.__setattr__(self, "index", {s: j for j, s in enumerate(flat)})

    @classmethod
    def from_mapping(cls, groups: Mapping[str, Iterable[str]], stem: bool = False) -> "SeedLexicon":
        """Build a lexicon from ``{aspect: [seed, ...]}``, normalizing every seed.

        Raw seeds are passed through :func:`tokenize`; a seed that yields zero or
        several tokens is rejected.  Repeats inside one aspect are collapsed.
        """
        aspects, seeds = [], []
        for name, raw_group in groups.items():
            if isinstance(raw_group, str):
                raise ParseError(f"seeds of {name!r} must be a list of strings")
            group: list[str] = []
            for raw in raw_group:
                if not isinstance(raw, str):
                    raise ParseError(f"seed {raw!r} of {name!r} is not a string")
                if raw.strip().upper() == UNK:
                    raise ReservedToken(f"{UNK!r} is reserved for masking and cannot be a seed")
                toks = tokenize(raw, stem)
                if len(toks) != 1:
                    raise MultiTokenSeed(f"seed {raw!r} of {name!r} tokenizes to {toks!r}")
                if toks[0] not in group:
                    group.append(toks[0])
            aspects.append(str(name))
            seeds.append(tuple(group))
        if not aspects:
            raise MissingGeneral("lexicon has no aspects")
        return cls(tuple(aspects), tuple(seeds), stem)

    @property
    def K(self) -> int:
        return len(self.aspects)

    @property
    def D(self) -> int:
        return len(self.seed_list)

    @property
    def general(self) -> int:
        return self.K - 1

    def owner_array(self) -> np.ndarray:
        """Aspect index of every seed, in seed order."""
        return np.array([self.owner[s] for s in self.seed_list], dtype=np.int64)

    def owner_matrix(self) -> np.ndarray:
        """``D x K`` one-hot matrix with ``[j, owner(j)] == 1``."""
        mat = np.zeros((self.D, self.K))
        mat[np.arange(self.D), self.owner_array()] = 1.0
        return mat

    def aspect_index(self, name: str) -> int:
        try:
            return self.aspects.index(name)
        except ValueError:
            raise ValidationError(f"unknown aspect {name!r}; expected one of {list(self.aspects)}")

    def to_dict(self) -> dict[str, list[str]]:
        return {name: list(group) for name, group in zip(self.aspects, self.seeds)}


@dataclass(frozen=True)
class SegmentRecord:
    review_id: str
    segment_id: str
    tokens: tuple[str, ...]
    gold_label: int | None = None

    def __post_init__(self):
        if not isinstance(self.tokens, tuple):
            object.__setattr__(self, "tokens", tuple(self.tokens))


class EmbeddingTable:
    """Read-only token -> vector map with a fixed dimension.

    Missing tokens return ``None`` from :meth:`get`; nothing is silently zero-filled.
    """

    def __init__(self, tokens: Sequence[str], vectors: np.ndarray):
        vectors = np.array(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(tokens):
            raise DimensionMismatch(
                f"{len(tokens)} tokens but vector array has shape {vectors.shape}"
            )
        if vectors.shape[1] < 1:
            raise DimensionMismatch("embedding dimension must be positive")
        self.tokens = list(tokens)
        self.vectors = vectors
        self.vectors.setflags(write=False)
        self.stoi = {t: i for i, t in enumerate(self.tokens)}

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.stoi

    def get(self, token: str) -> np.ndarray | None:
        i = self.stoi.get(token)
        return None if i is None else self.vectors[i]

    def __repr__(self):
        return f"EmbeddingTable({len(self)}, {self.dim})"


class SegmentVectors:
    """Externally computed segment embeddings keyed by ``segment_id``."""

    def __init__(self, vectors: Mapping[str, np.ndarray]):
        self.vectors = {k: np.asarray(v, dtype=np.float64) for k, v in vectors.items()}
        dims = {v.shape for v in self.vectors.values()}
        if len(dims) > 1:
            raise DimensionMismatch(f"segment vectors have mixed shapes {sorted(dims)}")
        self.dim = next(iter(dims))[0] if dims else 0

    def get(self, segment_id: str) -> np.ndarray | None:
        return self.vectors.get(segment_id)

    def __contains__(self, segment_id):
        return segment_id in self.vectors

    def __len__(self):
        return len(self.vectors)


def encode_bosw(seg: SegmentRecord | Sequence[str], lex: SeedLexicon) -> np.ndarray:
    """Bag-of-seed-words counts of length ``lex.D``; non-seed tokens are ignored."""
    tokens = seg.tokens if isinstance(seg, SegmentRecord) else seg
    counts = np.zeros(lex.D, dtype=np.int64)
    for tok in tokens:
        j = lex.index.get(tok)
        if j is not None:
            counts[j] += 1
    return counts


def encode_corpus(corpus: Sequence[SegmentRecord], lex: SeedLexicon) -> np.ndarray:
    """Stack :func:`encode_bosw` over a corpus into an ``N x D`` count matrix."""
    out = np.zeros((len(corpus), lex.D), dtype=np.int64)
    for i, seg in enumerate(corpus):
        for tok in seg.tokens:
            j = lex.index.get(tok)
            if j is not None:
                out[i, j] += 1
    return out


def mask_seed_words(seg: SegmentRecord, lex: SeedLexicon) -> SegmentRecord:
    """Replace every seed token with ``"UNK"``."""
    return replace(seg, tokens=tuple(UNK if t in lex.owner else t for t in seg.tokens))


def gold_labels(corpus: Sequence[SegmentRecord]) -> np.ndarray:
    labels = [seg.gold_label for seg in corpus]
    if any(label is None for label in labels):
        raise MissingGoldLabels("every segment needs a gold label for evaluation")
    return np.array(labels, dtype=np.int64)


def parse_lexicon(text: str, stem: bool = False) -> SeedLexicon:
    try:
        groups = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"lexicon is not valid JSON: {exc}") from exc
    if not isinstance(groups, dict):
        raise ParseError("lexicon must be a JSON object mapping aspect names to seed lists")
    return SeedLexicon.from_mapping(groups, stem)


def load_lexicon(path, stem: bool = False) -> SeedLexicon:
    lex = parse_lexicon(Path(path).read_text(encoding="utf-8"), stem)
    logger.info("loaded lexicon with K=%d aspects and D=%d seeds", lex.K, lex.D)
    return lex


def load_corpus(path, lexicon: SeedLexicon | None = None, stem: bool | None = None) -> list[SegmentRecord]:
    """Read a JSON-lines corpus, one segment per line, in file order.

    ``label`` fields are resolved to aspect indices through ``lexicon``; without a
    lexicon a labelled line is a :class:`ParseError`.  ``stem`` defaults to the
    lexicon's setting.
    """
    if stem is None:
        stem = lexicon.stem if lexicon is not None else False
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise ParseError(f"{path}:{lineno}: expected a JSON object")
            try:
                review_id = str(obj["review_id"])
                segment_id = str(obj["segment_id"])
                text = obj["text"]
            except KeyError as exc:
                raise ParseError(f"{path}:{lineno}: missing field {exc}") from exc
            if not isinstance(text, str):
                raise ParseError(f"{path}:{lineno}: 'text' must be a string")
            label = obj.get("label")
            gold = None
            if label is not None:
                if lexicon is None:
                    raise ParseError(f"{path}:{lineno}: labels need a lexicon to resolve aspect names")
                gold = lexicon.aspect_index(str(label))
            records.append(SegmentRecord(review_id, segment_id, tuple(tokenize(text, stem)), gold))
    return records


def load_embeddings(path) -> EmbeddingTable:
    """Read a word2vec-style text file: ``token v1 ... vd`` per line.

    An optional ``V d`` header line is detected and skipped.  The dimension is
    fixed by the first entry; later rows of another length raise
    :class:`DimensionMismatch`.
    """
    tokens: list[str] = []
    rows: list[list[float]] = []
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").rstrip(" ").split(" ")
            if not parts or parts == [""]:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                continue
            token, values = parts[0], parts[1:]
            try:
                vec = [float(v) for v in values]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: non-numeric vector entry") from exc
            if dim is None:
                if not vec:
                    raise ParseError(f"{path}:{lineno}: token without a vector")
                dim = len(vec)
            elif len(vec) != dim:
                raise DimensionMismatch(f"{path}:{lineno}: expected {dim} values, got {len(vec)}")
            tokens.append(token)
            rows.append(vec)
    if dim is None:
        raise ParseError(f"{path}: no embedding rows")
    return EmbeddingTable(tokens, np.array(rows, dtype=np.float64))


def load_segment_vectors(path) -> SegmentVectors:
    """Read ``{"segment_id": ..., "vector": [...]}`` lines."""
    vectors = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                sid, vec = str(obj["segment_id"]), np.asarray(obj["vector"], dtype=np.float64)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: bad segment vector line: {exc}") from exc
            if vec.ndim != 1 or vec.size == 0:
                raise ParseError(f"{path}:{lineno}: vector must be a non-empty list of numbers")
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise DimensionMismatch(f"{path}:{lineno}: expected {dim} values, got {vec.size}")
            vectors[sid] = vec
    return SegmentVectors(vectors)


def write_corpus(path, corpus: Sequence[SegmentRecord], lex: SeedLexicon | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for seg in corpus:
            obj = {"review_id": seg.review_id, "segment_id": seg.segment_id, "text": " ".join(seg.tokens)}
            if seg.gold_label is not None and lex is not None:
                obj["label"] = lex.aspects[seg.gold_label]
            fh.write(json.dumps(obj) + "\n")


def write_lexicon(path, lex: SeedLexicon) -> None:
    Path(path).write_text(json.dumps(lex.to_dict(), indent=1) + "\n", encoding="utf-8")


def write_embeddings(path, emb: EmbeddingTable, header: bool = True) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"{len(emb)} {emb.dim}\n")
        for tok, vec in zip(emb.tokens, emb.vectors):
            fh.write(tok + " " + " ".join(repr(float(v)) for v in vec) + "\n")

