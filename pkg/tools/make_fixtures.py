#!/usr/bin/env python3
"""Generate the bundled 50-sentence fixture corpus and its manifest.

Deliberately self-contained: tag encoding, CTXE packing, and all manifest
counts are computed here with independent logic so the fixture doubles as
an oracle for the library's parsers and statistics. Run from the repo
root; writes into fixtures/.
"""

from __future__ import annotations

import json
import struct
from collections import Counter
from pathlib import Path

import numpy as np

SEED = 20250810
GLOVE_DIM = 32
CTX_DIM = 32
N_SENTENCES = 50
DOC_BREAKS = {0, 20, 37}  # sentence indices that open a new document

FILLERS = [
    "The", "the", "a", "of", "in", "on", "said", "reported", "market",
    "shares", "rose", "fell", "percent", "today", "after", "talks",
    "officials", "quarter", "profit", "deal",
]
# these two stay out of the GloVe table to exercise the OOV path
OOV_FILLERS = {"quarter", "deal"}
# capitalized fillers stored lowercase-only to exercise the fallback
LOWERCASE_ONLY = {"The"}

FIRST_NAMES = ["Anna", "Boris", "Carla", "David", "Elena", "Frank", "Grace", "Henrik"]
LAST_NAMES = ["Almeida", "Brandt", "Costa", "Duarte", "Eriksen", "Fischer", "Garnier", "Hoffman"]
CITIES = ["Lisbon", "Oslo", "Prague", "Vienna", "Dublin", "Zagreb", "Riga", "Tallinn", "Porto", "Ghent"]
ORG_HEADS = ["Ystral", "Korund", "Meditek", "Salpa", "Tervix", "Quorat", "Nivola", "Bremax"]
ORG_TAILS = ["Corp", "Group", "Bank", "Holdings"]
NATIONS = ["Nordic", "Baltic", "Iberian", "Alpine", "Adriatic", "Hanseatic"]

RELS = ["nsubj", "obj", "obl", "nmod", "amod", "det", "case", "advmod", "conj"]
POS_CYCLE = ["DT", "NN", "VBD", "IN", "JJ", "RB", "NNS", "CC"]


def make_entity(etype: str, rng: np.random.Generator) -> list[str]:
    if etype == "PER":
        toks = [FIRST_NAMES[rng.integers(len(FIRST_NAMES))]]
        if rng.random() < 0.6:
            toks.append(LAST_NAMES[rng.integers(len(LAST_NAMES))])
        return toks
    if etype == "LOC":
        return [CITIES[rng.integers(len(CITIES))]]
    if etype == "ORG":
        toks = [ORG_HEADS[rng.integers(len(ORG_HEADS))]]
        if rng.random() < 0.5:
            toks.append(ORG_TAILS[rng.integers(len(ORG_TAILS))])
        return toks
    return [NATIONS[rng.integers(len(NATIONS))]]


def gen_sentence(rng: np.random.Generator) -> tuple[list[str], list[tuple[int, int, str]]]:
    """Returns (surfaces, spans) with spans as (start, end, type), end inclusive."""
    k = int(rng.choice([0, 1, 2, 3], p=[0.1, 0.4, 0.35, 0.15]))
    words: list[str] = []
    spans: list[tuple[int, int, str]] = []

    def fillers(lo: int, hi: int) -> None:
        for _ in range(int(rng.integers(lo, hi + 1))):
            words.append(FILLERS[rng.integers(len(FILLERS))])

    fillers(1, 3)
    for e in range(k):
        etype = str(rng.choice(["PER", "LOC", "ORG", "MISC"], p=[0.3, 0.3, 0.25, 0.15]))
        toks = make_entity(etype, rng)
        spans.append((len(words), len(words) + len(toks) - 1, etype))
        words.extend(toks)
        fillers(0 if e < k - 1 else 1, 3)  # zero-length gaps create adjacent entities
    if len(words) < 5:
        fillers(2, 4)
    return words, spans


def encode_iob1(n: int, spans: list[tuple[int, int, str]]) -> list[str]:
    """IOB1: chunks open with I- unless adjacent to a same-type chunk."""
    tags = ["O"] * n
    by_start = sorted(spans)
    prev_end, prev_type = -2, None
    for start, end, etype in by_start:
        head = "B-" if (start == prev_end + 1 and etype == prev_type) else "I-"
        tags[start] = head + etype
        for i in range(start + 1, end + 1):
            tags[i] = "I-" + etype
        prev_end, prev_type = end, etype
    return tags


def subword_chunks(word: str) -> list[str]:
    chunks = [word[i : i + 4] for i in range(0, len(word), 4)]
    if len(chunks) > 3:
        chunks = chunks[:2] + ["".join(chunks[2:])]
    return chunks


def main() -> None:
    out_dir = Path(__file__).resolve().parent.parent / "fixtures"
    out_dir.mkdir(exist_ok=True)
    rng = np.random.default_rng(SEED)

    sentences = [gen_sentence(rng) for _ in range(N_SENTENCES)]

    # --- independent manifest counts -------------------------------------
    entity_counts: Counter[str] = Counter()
    mention_counts: Counter[str] = Counter()
    n_tokens = 0
    for words, spans in sentences:
        n_tokens += len(words)
        for start, end, etype in spans:
            entity_counts[etype] += 1
            for i in range(start, end + 1):
                mention_counts[words[i]] += 1

    # --- CoNLL-2003 columns ----------------------------------------------
    entity_surfaces = set(
        FIRST_NAMES + LAST_NAMES + CITIES + ORG_HEADS + ORG_TAILS + NATIONS
    )
    conll_lines: list[str] = []
    for sid, (words, spans) in enumerate(sentences):
        if sid in DOC_BREAKS:
            conll_lines += ["-DOCSTART- -X- -X- O", ""]
        tags = encode_iob1(len(words), spans)
        for i, (w, t) in enumerate(zip(words, tags)):
            pos = "NNP" if w in entity_surfaces else POS_CYCLE[FILLERS.index(w) % len(POS_CYCLE)]
            conll_lines.append(f"{w} {pos} I-NP {t}")
        conll_lines.append("")
    (out_dir / "tiny.conll").write_text("\n".join(conll_lines) + "\n", encoding="utf-8")

    # --- CoNLL-U dependencies ----------------------------------------------
    dep_rng = np.random.default_rng(SEED + 1)
    conllu_lines: list[str] = []
    for sid, (words, _) in enumerate(sentences):
        conllu_lines.append(f"# sent_id = {sid}")
        if sid in (7, 23):  # multiword-range lines the parser must skip
            conllu_lines.append(f"1-2\t{words[0]}{words[1]}\t_\t_\t_\t_\t_\t_\t_\t_")
        for i, w in enumerate(words, start=1):
            head = 0 if i == 1 else int(dep_rng.integers(1, i))
            rel = "root" if head == 0 else RELS[dep_rng.integers(len(RELS))]
            conllu_lines.append(f"{i}\t{w}\t_\t_\t_\t_\t{head}\t{rel}\t_\t_")
        conllu_lines.append("")
    (out_dir / "tiny.conllu").write_text("\n".join(conllu_lines) + "\n", encoding="utf-8")

    # --- GloVe table --------------------------------------------------------
    glove_rng = np.random.default_rng(SEED + 2)
    vocab: list[str] = []
    seen = set()
    for words, _ in sentences:
        for w in words:
            key = w.lower() if w in LOWERCASE_ONLY else w
            if key not in seen and w not in OOV_FILLERS:
                seen.add(key)
                vocab.append(key)
    glove_lines = []
    for w in vocab:
        vec = glove_rng.uniform(-0.8, 0.8, GLOVE_DIM)
        glove_lines.append(w + " " + " ".join(f"{v:.5f}" for v in vec))
    (out_dir / "tiny.glove.txt").write_text("\n".join(glove_lines) + "\n", encoding="utf-8")

    # --- CTXE container (packed with local logic, not the library) ---------
    ctx_rng = np.random.default_rng(SEED + 3)
    blob = bytearray()
    blob += b"CTXE"
    blob += struct.pack("<III", 1, CTX_DIM, N_SENTENCES)
    for sid, (words, _) in enumerate(sentences):
        bits: list[int] = []
        for w in words:
            chunks = subword_chunks(w)
            bits += [1] + [0] * (len(chunks) - 1)
        vecs = (ctx_rng.standard_normal((len(bits), CTX_DIM)) * 0.5).astype("<f4")
        blob += struct.pack("<III", sid, len(bits), len(words))
        blob += bytes(bits)
        blob += vecs.tobytes()
    (out_dir / "tiny.ctxe").write_bytes(bytes(blob))

    # --- manifest -----------------------------------------------------------
    manifest = {
        "fixture": {
            "seed": SEED,
            "n_documents": len(DOC_BREAKS),
            "n_sentences": N_SENTENCES,
            "n_tokens": n_tokens,
            "entity_counts": {t: entity_counts.get(t, 0) for t in ("LOC", "MISC", "ORG", "PER")},
            "n_entities": sum(entity_counts.values()),
            "surface_mentions": dict(sorted(mention_counts.items())),
            "glove_dim": GLOVE_DIM,
            "ctx_dim": CTX_DIM,
        },
        "reference_runs": {
            "gcn_standalone": {
                "hidden_dim": 128,
                "dropout_rate": 0.0,
                "learning_rate": 8.0,
                "epochs": 300,
                "seed": 11,
                "min_train_accuracy": 0.95,
            },
            "joint_overfit": {
                "mode": "joint",
                "optimizer": "adam",
                "learning_rate": 0.01,
                "batch_size": 16,
                "dropout": 0.0,
                "epochs": 200,
                "seed": 11,
                "gcn": {"hidden_dim": 64, "global_dim": 32, "dropout_rate": 0.0},
                "min_token_accuracy": 0.99,
                "relaxed_f1": 100.0,
            },
        },
        "reference_results": {
            "note": (
                "Published reference results for this architecture on CoNLL-2003 "
                "(English). Not reproducible from the bundled fixtures: they require "
                "the licensed CoNLL-2003 data and a pretrained contextual encoder."
            ),
            "overall_f1": {
                "global_only": 88.63,
                "contextual_only": 93.28,
                "joint": 93.82,
            },
            "per_type": {
                "LOC": {"p": 94.15, "r": 93.53, "f1": 93.83},
                "MISC": {"p": 81.33, "r": 81.89, "f1": 81.62},
                "ORG": {"p": 88.97, "r": 92.29, "f1": 90.60},
                "PER": {"p": 96.67, "r": 97.09, "f1": 96.88},
            },
        },
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"wrote fixtures for {N_SENTENCES} sentences, {n_tokens} tokens -> {out_dir}")


if __name__ == "__main__":
    main()
