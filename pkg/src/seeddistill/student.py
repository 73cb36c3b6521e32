"""Embedding-based student classifier trained on teacher soft targets.

The student embeds a segment (``bow``, ``avg``, ``att`` or ``precomp``) and feeds
the vector to an affine softmax layer, optionally behind one tanh hidden layer.
Training minimizes the mean cross entropy against the teacher distribution plus
an L2 penalty on the classifier weights, using Adam over mini-batches.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .corpus import UNK, EmbeddingTable, SeedLexicon, SegmentRecord, SegmentVectors
from .errors import DimensionMismatch, EmptyCorpus, LengthMismatch, MissingPrecomputed, ValidationError
from .optim import Adam
from .teacher import softmax

logger = logging.getLogger(__name__)

EMBEDDERS = ("bow", "avg", "att", "precomp")
LOG_FLOOR = 1e-12
_PREDICT_CHUNK = 1024


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.005
    batch_size: int = 50
    dropout_rate: float = 0.5
    l2_lambda: float = 0.01
    max_epochs: int = 20
    patience: int = 3
    rng_seed: int = 0
    hard_targets: bool = False
    embedder: str = "avg"
    hidden_size: int = 0
    finetune_embeddings: bool = False
    shuffle: bool = True
    min_improvement: float = 1e-4

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValidationError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValidationError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.l2_lambda < 0:
            raise ValidationError("l2_lambda must be non-negative")
        if self.max_epochs < 0 or self.patience < 1:
            raise ValidationError("max_epochs must be >= 0 and patience >= 1")
        if self.embedder not in EMBEDDERS:
            raise ValidationError(f"embedder must be one of {EMBEDDERS}, got {self.embedder!r}")
        if self.hidden_size < 0:
            raise ValidationError("hidden_size must be non-negative")


@dataclass
class StudentModel:
    """Trained (or freshly initialized) student.

    ``params`` holds ``W`` (K x d_in) and ``b`` (K,), plus ``M`` (d x d) for the
    attention embedder and ``W1``/``b1`` when a hidden layer is used.  ``vocab``
    lists the training tokens; for ``bow`` it defines the input features, for
    ``avg``/``att`` it names the rows of ``params["E"]`` when embeddings were
    fine-tuned.  ``masked_seeds`` is set for models trained with seed words
    replaced by ``UNK``; prediction masks the same tokens.
    """

    config: TrainConfig
    K: int
    params: dict[str, np.ndarray]
    vocab: tuple[str, ...] = ()
    masked_seeds: frozenset[str] | None = None
    loss_history: list[float] = field(default_factory=list)

    @property
    def embedder(self) -> str:
        return self.config.embedder

    @property
    def input_dim(self) -> int:
        key = "W1" if "W1" in self.params else "W"
        return self.params[key].shape[1]

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "K": self.K,
            "params": {k: v.tolist() for k, v in sorted(self.params.items())},
            "vocab": list(self.vocab),
            "masked_seeds": None if self.masked_seeds is None else sorted(self.masked_seeds),
            "loss_history": list(self.loss_history),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "StudentModel":
        params = {k: np.array(v, dtype=np.float64) for k, v in obj["params"].items()}
        masked = obj.get("masked_seeds")
        return cls(
            config=TrainConfig(**obj["config"]),
            K=int(obj["K"]),
            params=params,
            vocab=tuple(obj.get("vocab", ())),
            masked_seeds=None if masked is None else frozenset(masked),
            loss_history=list(obj.get("loss_history", [])),
        )


def distill_loss(q, p) -> np.ndarray | float:
    """Cross entropy ``-sum_k q_k log p_k`` with ``p`` floored at 1e-12 inside the log."""
    q = np.asarray(q, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    out = -(q * np.log(np.maximum(p, LOG_FLOOR))).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def hard_label(p) -> int | np.ndarray:
    """Index of the largest probability, lowest index on ties."""
    out = np.argmax(np.asarray(p), axis=-1)
    return int(out) if np.ndim(out) == 0 else out


# forward / backward ---------------------------------------------------------


def _log_softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _pool(X, mask, M=None):
    """Average (``M is None``) or bilinear-attention pooling of token vectors.

    X is ``B x L x d``, mask ``B x L``.  Rows without valid tokens pool to zero.
    """
    n = mask.sum(axis=1)
    ns = np.maximum(n, 1)[:, None]
    maskf = mask[..., None]
    havg = (X * maskf).sum(axis=1) / ns
    if M is None:
        return havg, {"ns": ns}
    u = havg @ M.T
    s = np.einsum("bld,bd->bl", X, u)
    s = np.where(mask, s, -np.inf)
    mx = s.max(axis=1, keepdims=True)
    mx = np.where(np.isfinite(mx), mx, 0.0)
    e = np.exp(s - mx)
    z = e.sum(axis=1, keepdims=True)
    a = e / np.where(z > 0, z, 1.0)
    h = np.einsum("bl,bld->bd", a, X)
    return h, {"ns": ns, "havg": havg, "u": u, "a": a}


def _pool_backward(gh, X, mask, cache, M=None):
    """Gradients of pooling w.r.t. the token vectors and (attention only) ``M``."""
    ns = cache["ns"]
    maskf = mask[..., None]
    if M is None:
        return (gh / ns)[:, None, :] * maskf, None
    a, u, havg = cache["a"], cache["u"], cache["havg"]
    ga = np.einsum("bld,bd->bl", X, gh)
    gs = a * (ga - (a * ga).sum(axis=1, keepdims=True))
    gu = np.einsum("bl,bld->bd", gs, X)
    gM = gu.T @ havg
    ghavg = gu @ M
    gX = a[..., None] * gh[:, None, :] + gs[..., None] * u[:, None, :] + (ghavg / ns)[:, None, :] * maskf
    return gX, gM


def _classifier_forward(params, h, hidden_drop=None):
    if "W1" in params:
        a1 = np.tanh(h @ params["W1"].T + params["b1"])
        a1d = a1 if hidden_drop is None else a1 * hidden_drop
        return a1d @ params["W"].T + params["b"], {"a1": a1, "a1d": a1d}
    return h @ params["W"].T + params["b"], {}


def objective(params, targets, l2, *, X=None, mask=None, H=None, token_drop=None, hidden_drop=None):
    """Mean distillation loss plus ``l2 * (|W|^2 + |W1|^2)`` and its gradients.

    Inputs are either token vectors ``X`` (``B x L x d``) with ``mask`` for the
    pooled embedders, or ready segment vectors ``H`` (``B x d_in``).
    ``token_drop`` multiplies ``X`` (or ``H``) element-wise and ``hidden_drop``
    the hidden activations; both are inverted-dropout masks or None.

    Returns ``(loss, grads)``; ``grads`` has an entry per parameter plus ``"X"``
    (gradient w.r.t. the raw token vectors) when ``X`` is given.
    """
    B = targets.shape[0]
    M = params.get("M")
    if X is not None:
        Xd = X if token_drop is None else X * token_drop
        h, pool_cache = _pool(Xd, mask, M)
    else:
        h = H if token_drop is None else H * token_drop
    logits, cache = _classifier_forward(params, h, hidden_drop)
    logp = _log_softmax(logits)
    loss = -(targets * logp).sum() / B
    weights = [params["W"]] + ([params["W1"]] if "W1" in params else [])
    loss += l2 * sum(float((w * w).sum()) for w in weights)

    grads = {}
    dlogits = (np.exp(logp) - targets) / B
    if "W1" in params:
        grads["W"] = dlogits.T @ cache["a1d"] + 2 * l2 * params["W"]
        grads["b"] = dlogits.sum(axis=0)
        ga1 = dlogits @ params["W"]
        if hidden_drop is not None:
            ga1 = ga1 * hidden_drop
        gz1 = ga1 * (1.0 - cache["a1"] ** 2)
        grads["W1"] = gz1.T @ h + 2 * l2 * params["W1"]
        grads["b1"] = gz1.sum(axis=0)
        gh = gz1 @ params["W1"]
    else:
        grads["W"] = dlogits.T @ h + 2 * l2 * params["W"]
        grads["b"] = dlogits.sum(axis=0)
        gh = dlogits @ params["W"]
    if X is not None:
        gX, gM = _pool_backward(gh, Xd, mask, pool_cache, M)
        if gM is not None:
            grads["M"] = gM
        grads["X"] = gX if token_drop is None else gX * token_drop
    return float(loss), grads


# featurization ---------------------------------------------------------------


@dataclass
class _Features:
    """Padded token indices (``idx``/``mask``) into ``table`` or dense vectors ``H``."""

    idx: np.ndarray | None = None
    mask: np.ndarray | None = None
    table: np.ndarray | None = None
    H: np.ndarray | None = None

    def __len__(self):
        return len(self.idx) if self.H is None else len(self.H)


def _pad(index_lists: Sequence[Sequence[int]]):
    width = max([len(x) for x in index_lists] + [1])
    idx = np.zeros((len(index_lists), width), dtype=np.int64)
    mask = np.zeros((len(index_lists), width), dtype=bool)
    for i, row in enumerate(index_lists):
        idx[i, : len(row)] = row
        mask[i, : len(row)] = True
    return idx, mask


def _segment_tokens(seg: SegmentRecord, masked: frozenset[str] | None):
    if masked is None:
        return seg.tokens
    return [UNK if t in masked else t for t in seg.tokens]


def _build_vocab(corpus, masked, emb: EmbeddingTable | None):
    seen: dict[str, int] = {}
    for seg in corpus:
        for tok in _segment_tokens(seg, masked):
            if tok == UNK or tok in seen:
                continue
            if emb is not None and tok not in emb:
                continue
            seen[tok] = len(seen)
    return tuple(seen)


def _bow_matrix(idx, mask, V, keep=None):
    """Term-frequency rows (token counts divided by in-vocabulary length)."""
    weights = mask.astype(np.float64)
    n = np.maximum(weights.sum(axis=1, keepdims=True), 1.0)
    weights = weights / n
    if keep is not None:
        weights = weights * keep
    H = np.zeros((idx.shape[0], V))
    rows = np.broadcast_to(np.arange(idx.shape[0])[:, None], idx.shape)
    np.add.at(H, (rows[mask], idx[mask]), weights[mask])
    return H


def _featurize(corpus, model: StudentModel, emb) -> _Features:
    """Token indices / vectors for prediction with a trained model."""
    kind = model.embedder
    masked = model.masked_seeds
    if kind == "precomp":
        return _Features(H=_precomputed_rows(corpus, emb, model.input_dim))
    if kind == "bow":
        stoi = {t: i for i, t in enumerate(model.vocab)}
        idx, mask = _pad([[stoi[t] for t in _segment_tokens(s, masked) if t in stoi] for s in corpus])
        return _Features(idx=idx, mask=mask)
    if emb is None:
        raise ValidationError(f"the {kind!r} embedder needs an embedding table")
    tuned = model.params.get("E")
    stoi = {t: i for i, t in enumerate(model.vocab)} if tuned is not None else {}
    extra: dict[str, int] = {}
    rows = []
    for seg in corpus:
        row = []
        for tok in _segment_tokens(seg, masked):
            if tok == UNK:
                continue
            if tok in stoi:
                row.append(stoi[tok])
            elif tok in emb:
                if tok not in extra:
                    extra[tok] = len(stoi) + len(extra)
                row.append(extra[tok])
        rows.append(row)
    d = emb.dim
    if tuned is not None and tuned.shape[1] != d:
        raise DimensionMismatch(f"model embeddings have d={tuned.shape[1]}, table has d={d}")
    # one spare row so padded indices stay valid when nothing is known
    table = np.zeros((max(len(stoi) + len(extra), 1), d))
    if tuned is not None:
        table[: len(stoi)] = tuned[: len(stoi)]
    for tok, i in extra.items():
        table[i] = emb.get(tok)
    idx, mask = _pad(rows)
    return _Features(idx=idx, mask=mask, table=table)


def _precomputed_rows(corpus, vectors: SegmentVectors | None, dim: int | None = None):
    if vectors is None:
        raise ValidationError("the 'precomp' embedder needs precomputed segment vectors")
    out = []
    for seg in corpus:
        vec = vectors.get(seg.segment_id)
        if vec is None:
            raise MissingPrecomputed(f"no precomputed vector for segment {seg.segment_id!r}")
        out.append(vec)
    H = np.array(out, dtype=np.float64).reshape(len(out), -1)
    if dim is not None and H.shape[1] != dim:
        raise DimensionMismatch(f"precomputed vectors have d={H.shape[1]}, model expects {dim}")
    return H


def _embed_features(feats: _Features, model: StudentModel, lo: int, hi: int) -> np.ndarray:
    if feats.H is not None:
        return feats.H[lo:hi]
    idx, mask = feats.idx[lo:hi], feats.mask[lo:hi]
    if model.embedder == "bow":
        return _bow_matrix(idx, mask, len(model.vocab))
    h, _ = _pool(feats.table[idx], mask, model.params.get("M"))
    return h


# public prediction API --------------------------------------------------------


def embed_corpus(corpus: Sequence[SegmentRecord], model: StudentModel, emb=None) -> np.ndarray:
    """Segment vectors ``h`` for every segment, shape ``N x d_in``."""
    feats = _featurize(corpus, model, emb)
    chunks = [
        _embed_features(feats, model, lo, min(lo + _PREDICT_CHUNK, len(corpus)))
        for lo in range(0, len(corpus), _PREDICT_CHUNK)
    ]
    if not chunks:
        return np.zeros((0, model.input_dim))
    return np.concatenate(chunks)


def embed(seg: SegmentRecord, model: StudentModel, emb=None) -> np.ndarray:
    """Vector for one segment: a (attention-weighted) mean of its known token vectors.

    Segments without any known token map to the zero vector.
    """
    return embed_corpus([seg], model, emb)[0]


def classify(h: np.ndarray, model: StudentModel) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    if h.shape[-1] != model.input_dim:
        raise DimensionMismatch(f"segment vector has d={h.shape[-1]}, model expects {model.input_dim}")
    logits, _ = _classifier_forward(model.params, np.atleast_2d(h))
    probs = softmax(logits)
    return probs[0] if h.ndim == 1 else probs


def student_predict_corpus(corpus: Sequence[SegmentRecord], model: StudentModel, emb=None) -> np.ndarray:
    return classify(embed_corpus(corpus, model, emb), model) if corpus else np.zeros((0, model.K))


def student_predict(seg: SegmentRecord, model: StudentModel, emb=None) -> np.ndarray:
    return student_predict_corpus([seg], model, emb)[0]


# training -------------------------------------------------------------------------


def _init_params(cfg: TrainConfig, K: int, d_in: int, d_tok: int | None, rng) -> dict[str, np.ndarray]:
    params: dict[str, np.ndarray] = {}
    if cfg.hidden_size:
        # tanh layer needs symmetry breaking; output layer stays zero
        limit = np.sqrt(6.0 / (d_in + cfg.hidden_size))
        params["W1"] = rng.uniform(-limit, limit, size=(cfg.hidden_size, d_in))
        params["b1"] = np.zeros(cfg.hidden_size)
        params["W"] = np.zeros((K, cfg.hidden_size))
    else:
        params["W"] = np.zeros((K, d_in))
    params["b"] = np.zeros(K)
    if cfg.embedder == "att":
        params["M"] = np.zeros((d_tok, d_tok))
    return params


def _train_features(corpus, cfg: TrainConfig, emb, masked):
    if cfg.embedder == "precomp":
        H = _precomputed_rows(corpus, emb)
        return (), _Features(H=H), H.shape[1], None
    if cfg.embedder == "bow":
        vocab = _build_vocab(corpus, masked, None)
        stoi = {t: i for i, t in enumerate(vocab)}
        idx, mask = _pad([[stoi[t] for t in _segment_tokens(s, masked) if t in stoi] for s in corpus])
        return vocab, _Features(idx=idx, mask=mask), len(vocab), None
    if emb is None:
        raise ValidationError(f"the {cfg.embedder!r} embedder needs an embedding table")
    vocab = _build_vocab(corpus, masked, emb)
    stoi = {t: i for i, t in enumerate(vocab)}
    idx, mask = _pad([[stoi[t] for t in _segment_tokens(s, masked) if t in stoi] for s in corpus])
    table = np.array([emb.get(t) for t in vocab], dtype=np.float64).reshape(len(vocab), emb.dim)
    if not vocab:
        table = np.zeros((1, emb.dim))
    return vocab, _Features(idx=idx, mask=mask, table=table), emb.dim, emb.dim


def _dropout(rng, shape, rate):
    if rate <= 0.0:
        return None
    return (rng.random(shape) >= rate) / (1.0 - rate)


def train_student(
    corpus: Sequence[SegmentRecord],
    targets,
    emb=None,
    cfg: TrainConfig = TrainConfig(),
    *,
    mask_lexicon: SeedLexicon | None = None,
    init: StudentModel | None = None,
) -> StudentModel:
    """Fit a student to teacher distributions ``targets`` (``N x K``).

    ``emb`` is an :class:`EmbeddingTable` for ``avg``/``att``, a
    :class:`SegmentVectors` for ``precomp`` and ignored for ``bow``.  With
    ``mask_lexicon`` every seed token is replaced by ``UNK`` before training and
    at prediction time.  ``init`` warm-starts from another model's parameters.

    Training stops after ``cfg.patience`` epochs whose mean loss fails to improve
    on the best so far by a relative ``cfg.min_improvement``, or at
    ``cfg.max_epochs``.  Results are a deterministic function of ``cfg.rng_seed``.
    """
    targets = np.asarray(targets, dtype=np.float64)
    if len(corpus) == 0:
        raise EmptyCorpus("cannot train a student on an empty corpus")
    if targets.ndim != 2 or targets.shape[0] != len(corpus):
        raise LengthMismatch(f"{len(corpus)} segments but targets of shape {targets.shape}")
    K = targets.shape[1]
    if cfg.hard_targets:
        targets = np.eye(K)[np.argmax(targets, axis=1)]

    rng = np.random.default_rng(cfg.rng_seed)
    masked = None if mask_lexicon is None else frozenset(mask_lexicon.owner)
    vocab, feats, d_in, d_tok = _train_features(corpus, cfg, emb, masked)
    params = _init_params(cfg, K, d_in, d_tok, rng)
    if init is not None:
        for k, v in init.params.items():
            if k in params and params[k].shape == v.shape:
                params[k] = v.copy()
    finetune = cfg.finetune_embeddings and cfg.embedder in ("avg", "att")
    if finetune:
        params["E"] = feats.table.copy()
        if init is not None and "E" in init.params and init.params["E"].shape == params["E"].shape:
            params["E"] = init.params["E"].copy()

    model = StudentModel(cfg, K, params, vocab if cfg.embedder == "bow" or finetune else (), masked)

    opt = Adam(params, lr=cfg.learning_rate)
    N = len(corpus)
    best = np.inf
    stale = 0
    order = np.arange(N)
    for epoch in range(cfg.max_epochs):
        if cfg.shuffle:
            order = rng.permutation(N)
        total = 0.0
        for lo in range(0, N, cfg.batch_size):
            batch = order[lo : lo + cfg.batch_size]
            loss, grads = _batch_step(params, feats, batch, targets[batch], cfg, rng, finetune, len(vocab))
            opt.step(params, grads)
            total += loss * len(batch)
        epoch_loss = total / N
        model.loss_history.append(epoch_loss)
        logger.debug("epoch %d loss %.6f", epoch, epoch_loss)
        if epoch_loss < best * (1.0 - cfg.min_improvement) or best == np.inf:
            best = epoch_loss
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    return model


def _batch_step(params, feats: _Features, batch, q, cfg: TrainConfig, rng, finetune: bool, V: int):
    rate = cfg.dropout_rate
    hidden_drop = _dropout(rng, (len(batch), cfg.hidden_size), rate) if cfg.hidden_size else None
    if feats.H is not None:
        H = feats.H[batch]
        drop = _dropout(rng, H.shape, rate)
        return objective(params, q, cfg.l2_lambda, H=H, token_drop=drop, hidden_drop=hidden_drop)
    idx, mask = feats.idx[batch], feats.mask[batch]
    if cfg.embedder == "bow":
        # element-wise dropout on a one-hot token vector keeps or drops the whole token
        keep = _dropout(rng, idx.shape, rate)
        H = _bow_matrix(idx, mask, V, keep)
        return objective(params, q, cfg.l2_lambda, H=H, hidden_drop=hidden_drop)
    table = params["E"] if finetune else feats.table
    X = table[idx]
    drop = _dropout(rng, X.shape, rate)
    loss, grads = objective(params, q, cfg.l2_lambda, X=X, mask=mask, token_drop=drop, hidden_drop=hidden_drop)
    gX = grads.pop("X")
    if finetune:
        gE = np.zeros_like(table)
        np.add.at(gE, idx[mask], gX[mask])
        grads["E"] = gE
    return loss, grads
