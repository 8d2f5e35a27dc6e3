"""Sentence dependency graphs and the two-layer spectral graph convolution.

The normalized operator is A_hat = D^(-1/2) (A + I) D^(-1/2) over the
undirected word graph with self-loops; the network computes

    hidden(X) = A_hat . dropout(ReLU(A_hat X W0)) . W1        (then dropout)
    full(X)   = row_softmax(hidden(X))

All training math runs in binary64; parameter files store binary32.
Forward and backward are pure given an explicit dropout state, so runs are
reproducible bit-for-bit from a seed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import Corpus, DepArc, ROOT
from .embedio import WordVectors, lookup
from .errors import IndexOutOfRange, ShapeMismatch, TruncatedFile, BadMagic, BadVersion
from .numerics import check_finite, dropout_mask, glorot_uniform, softmax_rows

GCNP_MAGIC = b"GCNP"
GCNP_VERSION = 1

TAP_LAYER1 = "layer1"
TAP_LAYER2 = "layer2"


@dataclass(frozen=True)
class SentenceGraph:
    n: int
    edges: frozenset[tuple[int, int]]  # (i, j) with i < j


def build_graph(arcs: Sequence[DepArc], n: int) -> SentenceGraph:
    """One undirected edge per non-ROOT arc; duplicates merged."""
    edges = set()
    for arc in arcs:
        if arc.head == ROOT:
            continue
        i, j = arc.dependent, arc.head
        if not (0 <= i < n and 0 <= j < n):
            raise IndexOutOfRange(f"arc ({i} -> {j}) outside sentence of length {n}")
        if i == j:
            continue
        edges.add((min(i, j), max(i, j)))
    return SentenceGraph(n=n, edges=frozenset(edges))


@dataclass(frozen=True)
class NormAdj:
    """Symmetrically normalized adjacency with self-loops, sparse CSR."""

    n: int
    mat: sp.csr_array
    offsets: tuple[int, ...] = (0,)  # block start indices (batched graphs)


def normalize_adjacency(g: SentenceGraph) -> NormAdj:
    """A_hat = D^(-1/2) (A + I) D^(-1/2), exactly symmetric by construction.

    Each off-diagonal value 1/sqrt(d_i d_j) is computed once and stored at
    both (i, j) and (j, i); diagonals are 1/d_i. Isolated nodes keep degree
    1 from the self-loop.
    """
    deg = np.ones(g.n, dtype=np.float64)  # self-loop
    for i, j in g.edges:
        deg[i] += 1.0
        deg[j] += 1.0
    rows, cols, vals = [], [], []
    for i in range(g.n):
        rows.append(i)
        cols.append(i)
        vals.append(1.0 / deg[i])
    for i, j in sorted(g.edges):
        v = 1.0 / np.sqrt(deg[i] * deg[j])
        rows += [i, j]
        cols += [j, i]
        vals += [v, v]
    mat = sp.csr_array(
        (np.array(vals), (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64))),
        shape=(g.n, g.n),
    )
    return NormAdj(n=g.n, mat=mat)


def block_diag(graphs: Sequence[NormAdj]) -> NormAdj:
    """Batch per-sentence operators into one block-diagonal system."""
    if not graphs:
        return NormAdj(n=0, mat=sp.csr_array((0, 0), dtype=np.float64), offsets=())
    offsets = []
    total = 0
    for g in graphs:
        offsets.append(total)
        total += g.n
    mat = sp.block_diag([g.mat for g in graphs], format="csr")
    return NormAdj(n=total, mat=sp.csr_array(mat), offsets=tuple(offsets))


@dataclass(frozen=True)
class GcnParams:
    W0: np.ndarray  # C x H
    W1: np.ndarray  # H x F

    @property
    def c_dim(self) -> int:
        return self.W0.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.W0.shape[1]

    @property
    def out_dim(self) -> int:
        return self.W1.shape[1]


def init_gcn_params(c_dim: int, hidden_dim: int, out_dim: int, rng: np.random.Generator) -> GcnParams:
    """Glorot-uniform init per layer, seeded."""
    return GcnParams(
        W0=glorot_uniform(rng, c_dim, hidden_dim),
        W1=glorot_uniform(rng, hidden_dim, out_dim),
    )


@dataclass(frozen=True)
class GcnConfig:
    hidden_dim: int = 128
    dropout_rate: float = 0.5
    learning_rate: float = 0.05
    epochs: int = 300
    seed: int = 0
    global_dim: int = 128  # width of the feature tap when used for fusion
    tap: str = TAP_LAYER2

    def __post_init__(self) -> None:
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.tap not in (TAP_LAYER1, TAP_LAYER2):
            raise ValueError(f"unknown tap {self.tap!r}")


@dataclass(frozen=True)
class DropoutState:
    """Rate plus seed; the same state always realizes the same masks."""

    rate: float
    seed: int


@dataclass
class GcnCache:
    """Forward intermediates kept for the backward pass."""

    x: np.ndarray
    adj: NormAdj
    a1: np.ndarray  # A_hat X
    z1: np.ndarray  # A_hat X W0
    h1d: np.ndarray  # dropout(ReLU(z1))
    a2: np.ndarray  # A_hat h1d
    g: np.ndarray  # dropout(a2 W1) -- the layer-2 tap
    m1: np.ndarray | None
    m2: np.ndarray | None


def _check_shapes(x: np.ndarray, adj: NormAdj, p: GcnParams) -> None:
    if x.ndim != 2 or x.shape[0] != adj.n:
        raise ShapeMismatch(f"X has shape {x.shape}, adjacency has {adj.n} nodes")
    if x.shape[1] != p.c_dim:
        raise ShapeMismatch(f"X has {x.shape[1]} features, W0 expects {p.c_dim}")
    if p.W0.shape[1] != p.W1.shape[0]:
        raise ShapeMismatch(f"W0 {p.W0.shape} does not chain with W1 {p.W1.shape}")


def gcn_forward_cache(
    x: np.ndarray,
    adj: NormAdj,
    p: GcnParams,
    dropout_state: DropoutState | None = None,
) -> GcnCache:
    _check_shapes(x, adj, p)
    x = np.asarray(x, dtype=np.float64)
    m1 = m2 = None
    rng = None
    if dropout_state is not None and dropout_state.rate > 0.0:
        rng = np.random.default_rng(dropout_state.seed)
    a1 = adj.mat @ x
    z1 = a1 @ p.W0
    h1 = np.maximum(z1, 0.0)
    if rng is not None:
        m1 = dropout_mask(rng, h1.shape, dropout_state.rate)
        h1d = h1 * m1
    else:
        h1d = h1
    a2 = adj.mat @ h1d
    g0 = a2 @ p.W1
    if rng is not None:
        m2 = dropout_mask(rng, g0.shape, dropout_state.rate)
        g = g0 * m2
    else:
        g = g0
    return GcnCache(x=x, adj=adj, a1=a1, z1=z1, h1d=h1d, a2=a2, g=g, m1=m1, m2=m2)


def gcn_hidden(
    x: np.ndarray,
    adj: NormAdj,
    p: GcnParams,
    dropout_state: DropoutState | None = None,
) -> np.ndarray:
    """Pre-classifier node features: the global-embedding tap point."""
    return gcn_forward_cache(x, adj, p, dropout_state).g


def gcn_forward_full(
    x: np.ndarray,
    adj: NormAdj,
    p: GcnParams,
    dropout_state: DropoutState | None = None,
) -> np.ndarray:
    """Row-wise softmax over the layer-2 output: per-node class probabilities."""
    return softmax_rows(gcn_hidden(x, adj, p, dropout_state))


def tap_features(cache: GcnCache, tap: str) -> np.ndarray:
    return cache.h1d if tap == TAP_LAYER1 else cache.g


@dataclass(frozen=True)
class GcnGrads:
    dW0: np.ndarray
    dW1: np.ndarray


def gcn_backward_from_tap(cache: GcnCache, d_tap: np.ndarray, p: GcnParams, tap: str = TAP_LAYER2) -> GcnGrads:
    """Backpropagate a gradient arriving at the tap features into W0, W1."""
    if tap == TAP_LAYER2:
        dg0 = d_tap * cache.m2 if cache.m2 is not None else d_tap
        dW1 = cache.a2.T @ dg0
        da2 = dg0 @ p.W1.T
        dh1d = cache.adj.mat @ da2  # A_hat is symmetric
    else:
        dW1 = np.zeros_like(p.W1)
        dh1d = d_tap
    dh1 = dh1d * cache.m1 if cache.m1 is not None else dh1d
    dz1 = dh1 * (cache.z1 > 0.0)
    dW0 = cache.a1.T @ dz1
    return GcnGrads(dW0=dW0, dW1=dW1)


def masked_node_loss(
    logits: np.ndarray, gold: np.ndarray, loss_mask: np.ndarray
) -> tuple[float, np.ndarray]:
    """Masked mean cross-entropy over nodes and its gradient w.r.t. logits."""
    if logits.shape[0] != gold.shape[0] or logits.shape[0] != loss_mask.shape[0]:
        raise ShapeMismatch(
            f"{logits.shape[0]} logit rows, {gold.shape[0]} labels, {loss_mask.shape[0]} mask entries"
        )
    m = float(loss_mask.sum())
    if m == 0.0:
        return 0.0, np.zeros_like(logits)
    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    ce = lse - shifted[np.arange(len(gold)), gold]
    loss = float((ce * loss_mask).sum() / m)
    probs = softmax_rows(logits)
    dlogits = probs.copy()
    dlogits[np.arange(len(gold)), gold] -= 1.0
    dlogits *= loss_mask[:, None] / m
    return loss, dlogits


def gcn_backward(
    x: np.ndarray,
    adj: NormAdj,
    p: GcnParams,
    gold: np.ndarray,
    loss_mask: np.ndarray,
    dropout_state: DropoutState | None = None,
) -> tuple[GcnGrads, float]:
    """Analytic gradients of the standalone model's masked node cross-entropy."""
    cache = gcn_forward_cache(x, adj, p, dropout_state)
    loss, dlogits = masked_node_loss(cache.g, gold, loss_mask)
    grads = gcn_backward_from_tap(cache, dlogits, p, TAP_LAYER2)
    return grads, loss


def stack_corpus_inputs(
    corpus: Corpus, wv: WordVectors
) -> tuple[np.ndarray, NormAdj, np.ndarray]:
    """Full-batch inputs: stacked features, block-diagonal operator, labels."""
    feats = []
    adjs = []
    labels = []
    for sent in corpus:
        if sent.arcs is None:
            raise ShapeMismatch(f"sentence {sent.sent_id} has no dependency arcs")
        feats.append(np.stack([lookup(wv, t.surface) for t in sent.tokens]))
        adjs.append(normalize_adjacency(build_graph(sent.arcs, len(sent))))
        labels.extend(corpus.tagset.index(t.gold_tag) for t in sent.tokens)
    x = np.vstack(feats)
    return x, block_diag(adjs), np.array(labels, dtype=np.int64)


def train_gcn(
    corpus: Corpus, wv: WordVectors, cfg: GcnConfig
) -> tuple[GcnParams, list[float]]:
    """Standalone full-batch gradient descent on the whole corpus at once."""
    x, adj, gold = stack_corpus_inputs(corpus, wv)
    n_classes = len(corpus.tagset)
    rng = np.random.default_rng(cfg.seed)
    params = init_gcn_params(x.shape[1], cfg.hidden_dim, n_classes, rng)
    mask = np.ones(adj.n, dtype=np.float64)
    seed_rng = np.random.default_rng(cfg.seed)
    losses: list[float] = []
    for _ in range(cfg.epochs):
        ds = None
        if cfg.dropout_rate > 0.0:
            ds = DropoutState(cfg.dropout_rate, int(seed_rng.integers(0, 2**62)))
        grads, loss = gcn_backward(x, adj, params, gold, mask, ds)
        params = GcnParams(
            W0=params.W0 - cfg.learning_rate * grads.dW0,
            W1=params.W1 - cfg.learning_rate * grads.dW1,
        )
        check_finite("GCN parameters", params.W0, params.W1, loss)
        losses.append(loss)
    return params, losses


def gcn_token_accuracy(corpus: Corpus, wv: WordVectors, params: GcnParams) -> float:
    """Eval-mode node accuracy of the standalone model over a corpus."""
    x, adj, gold = stack_corpus_inputs(corpus, wv)
    probs = gcn_forward_full(x, adj, params)
    return float((probs.argmax(axis=1) == gold).mean())


def save_gcn_params(p: GcnParams, sink: IO[bytes]) -> None:
    sink.write(GCNP_MAGIC)
    sink.write(struct.pack("<IIII", GCNP_VERSION, p.c_dim, p.hidden_dim, p.out_dim))
    sink.write(np.ascontiguousarray(p.W0, dtype="<f4").tobytes())
    sink.write(np.ascontiguousarray(p.W1, dtype="<f4").tobytes())


def load_gcn_params(source: IO[bytes]) -> GcnParams:
    magic = source.read(4)
    if magic != GCNP_MAGIC:
        raise BadMagic("not a GCNP block")
    header = source.read(16)
    if len(header) != 16:
        raise TruncatedFile("GCNP header truncated")
    version, c_dim, hidden_dim, out_dim = struct.unpack("<IIII", header)
    if version != GCNP_VERSION:
        raise BadVersion(f"unsupported GCNP version {version}")
    def read_mat(rows: int, cols: int) -> np.ndarray:
        raw = source.read(rows * cols * 4)
        if len(raw) != rows * cols * 4:
            raise TruncatedFile("GCNP weights truncated")
        return np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(rows, cols)
    return GcnParams(W0=read_mat(c_dim, hidden_dim), W1=read_mat(hidden_dim, out_dim))
