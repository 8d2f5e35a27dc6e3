"""Independent oracles and generators shared by the test modules.

Everything here is deliberately written against plain dense numpy (or pure
Python loops) so it shares no code path with the library implementations
it is used to check.
"""

from __future__ import annotations

import numpy as np

from nerfusion import corpus as C, embedio as E


# ---------------------------------------------------------------------------
# dense GCN oracle


def dense_norm_adj(n: int, edges) -> np.ndarray:
    a = np.zeros((n, n))
    for i, j in edges:
        a[i, j] = a[j, i] = 1.0
    a = a + np.eye(n)
    d = a.sum(axis=1)
    d_inv_sqrt = np.diag(1.0 / np.sqrt(d))
    return d_inv_sqrt @ a @ d_inv_sqrt


def dense_softmax(m: np.ndarray) -> np.ndarray:
    e = np.exp(m - m.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def dense_gcn_hidden(x, a_hat, w0, w1) -> np.ndarray:
    return a_hat @ np.maximum(a_hat @ x @ w0, 0.0) @ w1


def random_graph(rng: np.random.Generator, n: int) -> frozenset:
    edges = set()
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.4:
                edges.add((i, j))
    return frozenset(edges)


# ---------------------------------------------------------------------------
# finite differences


def numeric_grad(loss_fn, w: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar loss over every entry of w."""
    grad = np.zeros_like(w)
    it = np.nditer(w, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        wp, wm = w.copy(), w.copy()
        wp[idx] += eps
        wm[idx] -= eps
        grad[idx] = (loss_fn(wp) - loss_fn(wm)) / (2.0 * eps)
    return grad


def max_rel_err(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.maximum(np.abs(a) + np.abs(b), 1e-8)
    return float((np.abs(a - b) / denom).max())


# ---------------------------------------------------------------------------
# relaxed-metric oracle: O(n^2) all-pairs overlap counting


def overlap_oracle(gold_sents, pred_sents):
    """Returns per-type dicts {type: (tp_pred, tp_gold, n_pred, n_gold)}."""
    types = ("LOC", "MISC", "ORG", "PER")
    out = {t: [0, 0, 0, 0] for t in types}
    for gold, pred in zip(gold_sents, pred_sents):
        for p in pred:
            out[p.etype][2] += 1
            hit = False
            for g in gold:
                if g.etype == p.etype and not (p.end < g.start or g.end < p.start):
                    hit = True
            if hit:
                out[p.etype][0] += 1
        for g in gold:
            out[g.etype][3] += 1
            hit = False
            for p in pred:
                if g.etype == p.etype and not (p.end < g.start or g.end < p.start):
                    hit = True
            if hit:
                out[g.etype][1] += 1
    return {t: tuple(v) for t, v in out.items()}


def random_span_sets(rng: np.random.Generator, length: int, max_spans: int):
    """Non-overlapping random spans over [0, length)."""
    spans = []
    pos = 0
    for _ in range(int(rng.integers(0, max_spans + 1))):
        if pos >= length:
            break
        start = int(rng.integers(pos, length))
        end = int(rng.integers(start, min(start + 3, length)))
        etype = str(rng.choice(["LOC", "MISC", "ORG", "PER"]))
        spans.append(C.EntitySpan(start, end, etype))
        pos = end + 2
    return spans


# ---------------------------------------------------------------------------
# engineered two-signal corpus: half lexical signal, half contextual signal


def make_signal_corpus(
    n_train: int = 140,
    n_test: int = 60,
    ctx_dim: int = 16,
    glove_dim: int = 16,
    data_seed: int = 500,
):
    """Corpus where LOC entities are pure surface signal and PER entities
    depend on a neighbor cue that only the synthetic contextual vectors
    encode. Returns (train, test, wv, ctx_train, ctx_test)."""
    rng = np.random.default_rng(data_seed)
    lexcities = [f"lexcity{i}" for i in range(10)]
    ambs = [f"amb{i}" for i in range(6)]
    fillers = [f"filler{i}" for i in range(14)]
    cue = "cuep"

    vec_rng = np.random.default_rng(data_seed + 1)
    surfaces = lexcities + ambs + fillers + [cue]
    wv = E.WordVectors(
        glove_dim,
        {s: vec_rng.uniform(-0.8, 0.8, glove_dim) for s in surfaces},
    )
    v_follow = vec_rng.normal(size=ctx_dim)
    v_other = vec_rng.normal(size=ctx_dim)

    def build(n_sents: int, sent_rng: np.random.Generator):
        sentences = []
        ctx_sents = []
        tagset = C.default_tagset(C.IOB2)
        for sid in range(n_sents):
            words: list[str] = []
            tags: list[str] = []
            for _ in range(int(sent_rng.integers(2, 5))):
                r = sent_rng.random()
                if r < 0.25:
                    words.append(str(sent_rng.choice(lexcities)))
                    tags.append("B-LOC")
                elif r < 0.5:
                    # cue followed by an ambiguous surface: entity reading
                    words += [cue, str(sent_rng.choice(ambs))]
                    tags += ["O", "B-PER"]
                elif r < 0.65:
                    # bare ambiguous surface: not an entity
                    words.append(str(sent_rng.choice(ambs)))
                    tags.append("O")
                else:
                    words.append(str(sent_rng.choice(fillers)))
                    tags.append("O")
            toks = tuple(C.Token(w, t) for w, t in zip(words, tags))
            arcs = tuple(
                C.DepArc(i, C.ROOT if i == 0 else int(sent_rng.integers(0, i)), "dep")
                for i in range(len(words))
            )
            sentences.append(C.Sentence(toks, 0, sid, arcs))

            # one subword per word; ctx rows encode only the neighbor cue
            bits = tuple([1] * len(words))
            rows = np.zeros((len(words), ctx_dim))
            for i in range(len(words)):
                base = v_follow if i > 0 and words[i - 1] == cue else v_other
                rows[i] = base + 0.05 * sent_rng.normal(size=ctx_dim)
            ctx_sents.append(
                E.ContextualSentence(sid, E.AlignmentMask(bits), rows.astype(np.float32))
            )
        corpus = C.Corpus(tuple(sentences), tagset)
        return corpus, E.ContextualFile(ctx_dim, tuple(ctx_sents))

    train, ctx_train = build(n_train, np.random.default_rng(data_seed + 2))
    test, ctx_test = build(n_test, np.random.default_rng(data_seed + 3))
    return train, test, wv, ctx_train, ctx_test
