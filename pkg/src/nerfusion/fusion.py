"""Feature alignment, concatenation, and the linear-softmax joint head.

Word-level graph features are placed at each word's first subword (the
alignment-mask positions), concatenated with the contextual vectors, and
classified by a single linear layer with row softmax. Training is
minibatch gradient descent; in joint and global modes the gradient flows
end-to-end into the graph-convolution weights. Contextual vectors are
frozen inputs throughout.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, replace
from typing import IO, Sequence

import numpy as np

from .corpus import Corpus, IOB2, Sentence, TagSet, iob_to_spans
from .embedio import (
    AlignmentMask,
    ContextualFile,
    WordVectors,
    lookup,
    validate_ctxe_against_corpus,
)
from .errors import (
    BadMagic,
    BadVersion,
    ConfigError,
    DataError,
    MaskSumMismatch,
    MissingModel,
    ShapeMismatch,
    TruncatedFile,
)
from .gcn import (
    GcnConfig,
    GcnGrads,
    GcnParams,
    DropoutState,
    NormAdj,
    TAP_LAYER1,
    TAP_LAYER2,
    block_diag,
    build_graph,
    gcn_backward_from_tap,
    gcn_forward_cache,
    init_gcn_params,
    load_gcn_params,
    normalize_adjacency,
    save_gcn_params,
    tap_features,
)
from .metrics import EvalReport, relaxed_prf, strict_prf
from .numerics import check_finite, dropout_mask, glorot_uniform, softmax_rows

logger = logging.getLogger(__name__)

FUSE_MAGIC = b"FUSE"
FUSE_VERSION = 1

MODE_GLOBAL = "global_only"
MODE_CONTEXTUAL = "contextual_only"
MODE_JOINT = "joint"
MODES = (MODE_GLOBAL, MODE_CONTEXTUAL, MODE_JOINT)


@dataclass(frozen=True)
class JointParams:
    W_out: np.ndarray  # (F_g + ctx_dim) x T
    b: np.ndarray  # T

    @property
    def in_dim(self) -> int:
        return self.W_out.shape[0]

    @property
    def n_tags(self) -> int:
        return self.W_out.shape[1]


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    learning_rate: float = 5e-5
    epochs: int = 4
    dropout: float = 0.5
    seed: int = 0
    mode: str = MODE_JOINT
    optimizer: str = "sgd"  # "adam" converges much faster on a fresh linear head
    # head dropout placement: on the fused vector, or per block before
    # concatenation (same distribution, different realized masks)
    dropout_stage: str = "fused"

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.dropout_stage not in ("fused", "parts"):
            raise ValueError(f"unknown dropout_stage {self.dropout_stage!r}")


@dataclass(frozen=True)
class Prediction:
    sent_id: int
    tags: tuple[str, ...]
    probs: np.ndarray  # word_count x T


@dataclass(frozen=True)
class JointModel:
    """Joint head plus (when the mode uses global features) the GCN weights."""

    params: JointParams
    gcn: GcnParams | None
    global_dim: int  # 0 in contextual_only mode
    ctx_dim: int  # 0 in global_only mode
    tap: str = TAP_LAYER2

    @property
    def mode(self) -> str:
        if self.global_dim and self.ctx_dim:
            return MODE_JOINT
        if self.global_dim:
            return MODE_GLOBAL
        return MODE_CONTEXTUAL


def align_global(gcn_feats: np.ndarray, mask: AlignmentMask) -> np.ndarray:
    """Place word-level rows at the mask's 1 positions; 0 rows elsewhere."""
    if gcn_feats.shape[0] != mask.word_count:
        raise MaskSumMismatch(
            f"{gcn_feats.shape[0]} feature rows for mask summing to {mask.word_count}"
        )
    out = np.zeros((len(mask), gcn_feats.shape[1]), dtype=np.float64)
    out[mask.word_positions()] = gcn_feats
    return out


def fuse(global_aligned: np.ndarray, contextual: np.ndarray) -> np.ndarray:
    """Row-wise concatenation, global block first."""
    if global_aligned.shape[0] != contextual.shape[0]:
        raise ShapeMismatch(
            f"{global_aligned.shape[0]} global rows vs {contextual.shape[0]} contextual rows"
        )
    return np.hstack([global_aligned, contextual])


def classifier_forward(
    fused: np.ndarray,
    p: JointParams,
    dropout_state: DropoutState | None = None,
) -> np.ndarray:
    """Linear + row softmax; dropout on the fused input in train mode."""
    if fused.shape[1] != p.in_dim:
        raise ShapeMismatch(f"fused width {fused.shape[1]} != head input {p.in_dim}")
    if dropout_state is not None and dropout_state.rate > 0.0:
        rng = np.random.default_rng(dropout_state.seed)
        fused = fused * dropout_mask(rng, fused.shape, dropout_state.rate)
    return softmax_rows(fused @ p.W_out + p.b)


def masked_cross_entropy(
    probs: np.ndarray, gold: Sequence[int], mask: AlignmentMask
) -> float:
    """Mean negative log-probability of gold tags at mask==1 positions."""
    if probs.shape[0] != len(mask):
        raise ShapeMismatch(f"{probs.shape[0]} probability rows for {len(mask)} mask bits")
    if len(gold) != mask.word_count:
        raise ShapeMismatch(f"{len(gold)} gold tags for mask summing to {mask.word_count}")
    rows = mask.word_positions()
    if rows.size == 0:
        return 0.0
    picked = probs[rows, np.asarray(gold, dtype=np.int64)]
    return float(-np.log(picked).mean())


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class _SentFeats:
    """Static per-sentence inputs resolved once before training."""

    x_words: np.ndarray | None  # W x C (modes with global features)
    adj: NormAdj | None
    ctx: np.ndarray | None  # S x ctx_dim (modes with contextual features)
    word_rows: np.ndarray  # indices of supervised rows within this sentence
    n_rows: int  # S in contextual modes, W in global_only
    gold: np.ndarray  # W tag indices


@dataclass(frozen=True)
class _Grads:
    dW_out: np.ndarray
    db: np.ndarray
    gcn: GcnGrads | None


def _prepare_features(
    corpus: Corpus,
    wv: WordVectors | None,
    ctx: ContextualFile | None,
    mode: str,
) -> list[_SentFeats]:
    uses_global = mode != MODE_CONTEXTUAL
    uses_ctx = mode != MODE_GLOBAL
    if uses_ctx:
        if ctx is None:
            raise ConfigError(f"mode {mode!r} requires a contextual-embedding file")
        violations = validate_ctxe_against_corpus(ctx, corpus)
        if violations:
            raise DataError("contextual file does not match corpus: " + "; ".join(violations))
    if uses_global and wv is None:
        raise ConfigError(f"mode {mode!r} requires word vectors")

    feats = []
    for sent in corpus:
        x_words = adj = ctx_rows = None
        if uses_global:
            if sent.arcs is None:
                raise DataError(f"sentence {sent.sent_id} has no dependency arcs")
            x_words = np.stack([lookup(wv, t.surface) for t in sent.tokens])
            adj = normalize_adjacency(build_graph(sent.arcs, len(sent)))
        if uses_ctx:
            cs = ctx.sentences[sent.sent_id]
            ctx_rows = cs.vectors.astype(np.float64)
            word_rows = cs.mask.word_positions()
            n_rows = len(cs.mask)
        else:
            word_rows = np.arange(len(sent))
            n_rows = len(sent)
        gold = np.array([corpus.tagset.index(t.gold_tag) for t in sent.tokens], dtype=np.int64)
        feats.append(_SentFeats(x_words, adj, ctx_rows, word_rows, n_rows, gold))
    return feats


def _batch_forward_backward(
    batch: Sequence[_SentFeats],
    model: JointModel,
    gcn_dropout: DropoutState | None,
    head_dropout: DropoutState | None,
    head_stage: str = "fused",
) -> tuple[float, _Grads, int]:
    """Loss and analytic gradients over one minibatch of sentences."""
    uses_global = model.global_dim > 0
    uses_ctx = model.ctx_dim > 0

    cache = None
    tap_rows: list[np.ndarray] = []
    if uses_global:
        adj = block_diag([f.adj for f in batch])
        xb = np.vstack([f.x_words for f in batch])
        cache = gcn_forward_cache(xb, adj, model.gcn, gcn_dropout)
        tap = tap_features(cache, model.tap)
        for f, off in zip(batch, adj.offsets):
            tap_rows.append(tap[off : off + len(f.gold)])

    fused_parts = []
    sup_rows = []
    gold_all = []
    row_offset = 0
    for i, f in enumerate(batch):
        if uses_global and uses_ctx:
            aligned = np.zeros((f.n_rows, model.global_dim))
            aligned[f.word_rows] = tap_rows[i]
            part = np.hstack([aligned, f.ctx])
        elif uses_global:
            part = tap_rows[i]
        else:
            part = f.ctx
        fused_parts.append(part)
        sup_rows.append(row_offset + f.word_rows)
        gold_all.append(f.gold)
        row_offset += f.n_rows
    fused = np.vstack(fused_parts)
    rows = np.concatenate(sup_rows)
    gold = np.concatenate(gold_all)

    head_mask = None
    fused_d = fused
    if head_dropout is not None and head_dropout.rate > 0.0:
        rng = np.random.default_rng(head_dropout.seed)
        if head_stage == "parts" and uses_global and uses_ctx:
            m_global = dropout_mask(rng, (fused.shape[0], model.global_dim), head_dropout.rate)
            m_ctx = dropout_mask(rng, (fused.shape[0], model.ctx_dim), head_dropout.rate)
            head_mask = np.hstack([m_global, m_ctx])
        else:
            head_mask = dropout_mask(rng, fused.shape, head_dropout.rate)
        fused_d = fused * head_mask

    logits = fused_d @ model.params.W_out + model.params.b
    n_sup = rows.size
    shifted = logits[rows] - logits[rows].max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    loss = float((lse - shifted[np.arange(n_sup), gold]).sum() / n_sup)

    dlogits = np.zeros_like(logits)
    probs = softmax_rows(logits[rows])
    probs[np.arange(n_sup), gold] -= 1.0
    dlogits[rows] = probs / n_sup

    dW_out = fused_d.T @ dlogits
    db = dlogits.sum(axis=0)

    gcn_grads = None
    if uses_global:
        dfused = dlogits @ model.params.W_out.T
        if head_mask is not None:
            dfused = dfused * head_mask
        d_tap_parts = []
        row_offset = 0
        for i, f in enumerate(batch):
            block = dfused[row_offset : row_offset + f.n_rows, : model.global_dim]
            d_tap_parts.append(block[f.word_rows] if uses_ctx else block)
            row_offset += f.n_rows
        d_tap = np.vstack(d_tap_parts)
        gcn_grads = gcn_backward_from_tap(cache, d_tap, model.gcn, model.tap)

    return loss, _Grads(dW_out=dW_out, db=db, gcn=gcn_grads), n_sup


class _Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, tensors: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        self.t += 1
        out = {}
        for name, value in tensors.items():
            g = grads[name]
            m = self.m.get(name, np.zeros_like(value))
            v = self.v.get(name, np.zeros_like(value))
            m = self.beta1 * m + (1 - self.beta1) * g
            v = self.beta2 * v + (1 - self.beta2) * g * g
            self.m[name], self.v[name] = m, v
            m_hat = m / (1 - self.beta1**self.t)
            v_hat = v / (1 - self.beta2**self.t)
            out[name] = value - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return out


def _init_model(
    n_features_ctx: int,
    n_tags: int,
    gcn_cfg: GcnConfig,
    mode: str,
    glove_dim: int,
    rng: np.random.Generator,
) -> JointModel:
    gcn = None
    global_dim = 0
    if mode != MODE_CONTEXTUAL:
        if gcn_cfg.tap == TAP_LAYER1 and gcn_cfg.global_dim != gcn_cfg.hidden_dim:
            raise ConfigError("tap=layer1 requires global_dim == hidden_dim")
        gcn = init_gcn_params(glove_dim, gcn_cfg.hidden_dim, gcn_cfg.global_dim, rng)
        global_dim = gcn_cfg.global_dim
    ctx_dim = n_features_ctx if mode != MODE_GLOBAL else 0
    k = global_dim + ctx_dim
    params = JointParams(W_out=glorot_uniform(rng, k, n_tags), b=np.zeros(n_tags))
    return JointModel(params=params, gcn=gcn, global_dim=global_dim, ctx_dim=ctx_dim, tap=gcn_cfg.tap)


def train_joint(
    corpus: Corpus,
    wv: WordVectors | None,
    ctx: ContextualFile | None,
    gcn_cfg: GcnConfig,
    cfg: TrainConfig,
) -> tuple[JointModel, list[float]]:
    """Minibatch training of the joint head (and GCN weights when used).

    Sentences are reshuffled each epoch with a seeded RNG; two runs with
    the same config and seed produce bit-identical parameters.
    """
    feats = _prepare_features(corpus, wv, ctx, cfg.mode)
    if not feats:
        raise DataError("empty corpus")
    glove_dim = wv.dim if wv is not None else 0
    ctx_dim = ctx.ctx_dim if ctx is not None and cfg.mode != MODE_GLOBAL else 0
    rng = np.random.default_rng(cfg.seed)
    model = _init_model(ctx_dim, len(corpus.tagset), gcn_cfg, cfg.mode, glove_dim, rng)

    shuffle_rng = np.random.default_rng(cfg.seed)
    seed_rng = np.random.default_rng(cfg.seed + 1)
    adam = _Adam(cfg.learning_rate) if cfg.optimizer == "adam" else None
    losses: list[float] = []
    for _ in range(cfg.epochs):
        order = shuffle_rng.permutation(len(feats))
        total, weight = 0.0, 0
        for start in range(0, len(order), cfg.batch_size):
            batch = [feats[i] for i in order[start : start + cfg.batch_size]]
            gcn_ds = head_ds = None
            s1, s2 = (int(seed_rng.integers(0, 2**62)) for _ in range(2))
            if model.global_dim and gcn_cfg.dropout_rate > 0.0:
                gcn_ds = DropoutState(gcn_cfg.dropout_rate, s1)
            if cfg.dropout > 0.0:
                head_ds = DropoutState(cfg.dropout, s2)
            loss, grads, n_sup = _batch_forward_backward(
                batch, model, gcn_ds, head_ds, cfg.dropout_stage
            )
            model = _apply_step(model, grads, cfg.learning_rate, adam)
            total += loss * n_sup
            weight += n_sup
        epoch_loss = total / weight
        check_finite("joint parameters", model.params.W_out, model.params.b, epoch_loss)
        if model.gcn is not None:
            check_finite("GCN parameters", model.gcn.W0, model.gcn.W1)
        losses.append(epoch_loss)
    return model, losses


def _apply_step(
    model: JointModel, grads: _Grads, lr: float, adam: _Adam | None
) -> JointModel:
    tensors = {"W_out": model.params.W_out, "b": model.params.b}
    gdict = {"W_out": grads.dW_out, "b": grads.db}
    if grads.gcn is not None:
        tensors.update({"W0": model.gcn.W0, "W1": model.gcn.W1})
        gdict.update({"W0": grads.gcn.dW0, "W1": grads.gcn.dW1})
    if adam is not None:
        new = adam.step(tensors, gdict)
    else:
        new = {k: tensors[k] - lr * gdict[k] for k in tensors}
    params = JointParams(W_out=new["W_out"], b=new["b"])
    gcn = GcnParams(W0=new["W0"], W1=new["W1"]) if grads.gcn is not None else model.gcn
    return replace(model, params=params, gcn=gcn)


# ---------------------------------------------------------------------------
# inference


def _sentence_fused(
    sent: Sentence,
    model: JointModel,
    wv: WordVectors | None,
    ctx_sent,
) -> tuple[np.ndarray, np.ndarray]:
    """Eval-mode fused features for one sentence plus its supervised rows."""
    uses_global = model.global_dim > 0
    uses_ctx = model.ctx_dim > 0
    if uses_global and wv is None:
        raise MissingModel("this model needs word vectors")
    if uses_ctx and ctx_sent is None:
        raise MissingModel("this model needs contextual vectors for the sentence")

    tap = None
    if uses_global:
        if sent.arcs is None:
            raise DataError(f"sentence {sent.sent_id} has no dependency arcs")
        x = np.stack([lookup(wv, t.surface) for t in sent.tokens])
        adj = normalize_adjacency(build_graph(sent.arcs, len(sent)))
        tap = tap_features(gcn_forward_cache(x, adj, model.gcn, None), model.tap)

    if uses_ctx:
        if ctx_sent.word_count != len(sent):
            raise DataError(
                f"sentence {sent.sent_id}: {len(sent)} words but contextual entry "
                f"stores {ctx_sent.word_count}"
            )
        ctx_rows = ctx_sent.vectors.astype(np.float64)
        word_rows = ctx_sent.mask.word_positions()
        if uses_global:
            fused = fuse(align_global(tap, ctx_sent.mask), ctx_rows)
        else:
            fused = ctx_rows
    else:
        fused = tap
        word_rows = np.arange(len(sent))
    return fused, word_rows


def predict(
    sent: Sentence,
    model: JointModel,
    tagset: TagSet,
    wv: WordVectors | None = None,
    ctx_sent=None,
) -> Prediction:
    """Per-word argmax tags; ties break toward the lowest tag index."""
    if len(tagset) != model.params.n_tags:
        raise ShapeMismatch(f"model has {model.params.n_tags} tags, tagset has {len(tagset)}")
    fused, word_rows = _sentence_fused(sent, model, wv, ctx_sent)
    probs = classifier_forward(fused, model.params, None)[word_rows]
    tags = tuple(tagset.label(i) for i in probs.argmax(axis=1))
    return Prediction(sent_id=sent.sent_id, tags=tags, probs=probs)


@dataclass(frozen=True)
class EvalOutcome:
    relaxed: EvalReport
    strict: EvalReport
    token_accuracy: float
    predictions: tuple[Prediction, ...]


def evaluate_model(
    corpus: Corpus,
    model: JointModel,
    wv: WordVectors | None = None,
    ctx: ContextualFile | None = None,
) -> EvalOutcome:
    """Predict every sentence and score spans with both metrics."""
    if model.ctx_dim:
        if ctx is None:
            raise MissingModel("this model needs a contextual-embedding file")
        violations = validate_ctxe_against_corpus(ctx, corpus)
        if violations:
            raise DataError("contextual file does not match corpus: " + "; ".join(violations))
    gold_spans, pred_spans, preds = [], [], []
    correct = total = 0
    repairs: list[int] = []
    for sent in corpus:
        ctx_sent = ctx.sentences[sent.sent_id] if model.ctx_dim else None
        pred = predict(sent, model, corpus.tagset, wv, ctx_sent)
        preds.append(pred)
        gold_spans.append(iob_to_spans(sent.tags(), IOB2))
        pred_spans.append(iob_to_spans(list(pred.tags), IOB2, repairs=repairs))
        correct += sum(g == p for g, p in zip(sent.tags(), pred.tags))
        total += len(sent)
    if repairs:
        logger.info("repaired %d invalid predicted-tag transitions", len(repairs))
    return EvalOutcome(
        relaxed=relaxed_prf(gold_spans, pred_spans),
        strict=strict_prf(gold_spans, pred_spans),
        token_accuracy=correct / total if total else 0.0,
        predictions=tuple(preds),
    )


# ---------------------------------------------------------------------------
# ablation


@dataclass(frozen=True)
class AblationInputs:
    wv: WordVectors | None
    ctx_train: ContextualFile | None
    ctx_test: ContextualFile | None
    gcn_cfg: GcnConfig


ABLATION_LABELS = {
    MODE_GLOBAL: "Global features",
    MODE_CONTEXTUAL: "Contextual features",
    MODE_JOINT: "Global + contextual features",
}


@dataclass(frozen=True)
class AblationResult:
    reports: dict[str, EvalReport]  # keyed by mode

    def f1(self, mode: str) -> float:
        return self.reports[mode].overall.f1

    def table(self) -> str:
        width = max(len(v) for v in ABLATION_LABELS.values()) + 2
        lines = [f"{'Embeddings':<{width}}{'F1 score':>10}"]
        for mode in (MODE_GLOBAL, MODE_CONTEXTUAL, MODE_JOINT):
            lines.append(f"{ABLATION_LABELS[mode]:<{width}}{self.f1(mode):>10.2f}")
        return "\n".join(lines)


def ablation_run(
    corpus_train: Corpus,
    corpus_test: Corpus,
    inputs: AblationInputs,
    cfg: TrainConfig,
) -> AblationResult:
    """Train and evaluate all three modes with identical seeds."""
    reports = {}
    for mode in (MODE_GLOBAL, MODE_CONTEXTUAL, MODE_JOINT):
        mode_cfg = replace(cfg, mode=mode)
        model, _ = train_joint(corpus_train, inputs.wv, inputs.ctx_train, inputs.gcn_cfg, mode_cfg)
        outcome = evaluate_model(corpus_test, model, inputs.wv, inputs.ctx_test)
        reports[mode] = outcome.relaxed
    return AblationResult(reports=reports)


# ---------------------------------------------------------------------------
# model files


def save_joint_model(model: JointModel, sink: IO[bytes]) -> None:
    """FUSE layout: magic, version, F_g, ctx_dim, T, W_out, b, then the
    embedded GCNP block when the mode uses global features."""
    p = model.params
    sink.write(FUSE_MAGIC)
    sink.write(struct.pack("<IIII", FUSE_VERSION, model.global_dim, model.ctx_dim, p.n_tags))
    sink.write(np.ascontiguousarray(p.W_out, dtype="<f4").tobytes())
    sink.write(np.ascontiguousarray(p.b, dtype="<f4").tobytes())
    if model.global_dim:
        save_gcn_params(model.gcn, sink)


def load_joint_model(source: IO[bytes], tap: str | None = None) -> JointModel:
    """Read a FUSE file; the tap is inferred from dimensions unless given."""
    if source.read(4) != FUSE_MAGIC:
        raise BadMagic("not a FUSE file")
    header = source.read(16)
    if len(header) != 16:
        raise TruncatedFile("FUSE header truncated")
    version, global_dim, ctx_dim, n_tags = struct.unpack("<IIII", header)
    if version != FUSE_VERSION:
        raise BadVersion(f"unsupported FUSE version {version}")
    k = global_dim + ctx_dim
    raw = source.read((k * n_tags + n_tags) * 4)
    if len(raw) != (k * n_tags + n_tags) * 4:
        raise TruncatedFile("FUSE weights truncated")
    flat = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    params = JointParams(
        W_out=flat[: k * n_tags].reshape(k, n_tags), b=flat[k * n_tags :]
    )
    gcn = None
    if global_dim:
        gcn = load_gcn_params(source)
        if tap is None:
            if global_dim == gcn.out_dim:
                tap = TAP_LAYER2
            elif global_dim == gcn.hidden_dim:
                tap = TAP_LAYER1
            else:
                raise ShapeMismatch(
                    f"global_dim {global_dim} matches neither GCN output "
                    f"{gcn.out_dim} nor hidden {gcn.hidden_dim}"
                )
    return JointModel(
        params=params, gcn=gcn, global_dim=global_dim, ctx_dim=ctx_dim, tap=tap or TAP_LAYER2
    )
