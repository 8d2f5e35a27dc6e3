"""CTXE container writer (the binary interface consumed by nerfusion).

Layout (little-endian): magic ``CTXE``; u32 version = 1; u32 ctx_dim;
u32 sentence_count; then per sentence u32 sent_id, u32 subword_count,
u32 word_count, subword_count mask bytes in {0,1}, and subword_count x
ctx_dim float32 rows.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable

import numpy as np

from .conll import ExtractError

MAGIC = b"CTXE"
VERSION = 1


def write_ctxe(
    path: str | Path,
    ctx_dim: int,
    sentences: Iterable[tuple[list[int], np.ndarray]],
) -> int:
    """Write (mask_bits, float32 matrix) pairs; returns sentence count."""
    blob = bytearray()
    count = 0
    for sent_id, (bits, vectors) in enumerate(sentences):
        vectors = np.ascontiguousarray(vectors, dtype="<f4")
        if vectors.ndim != 2 or vectors.shape != (len(bits), ctx_dim):
            raise ExtractError(
                f"sentence {sent_id}: vector shape {vectors.shape} does not match "
                f"{len(bits)} mask bits x {ctx_dim}"
            )
        if any(b not in (0, 1) for b in bits):
            raise ExtractError(f"sentence {sent_id}: mask bits must be 0 or 1")
        blob += struct.pack("<III", sent_id, len(bits), sum(bits))
        blob += bytes(bits)
        blob += vectors.tobytes()
        count += 1
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", VERSION, ctx_dim, count))
        fh.write(bytes(blob))
    return count


def write_sidecar(ctxe_path: str | Path, fields: dict[str, str]) -> Path:
    """Producer metadata next to the container (plain text, not in CTXE)."""
    meta_path = Path(str(ctxe_path) + ".meta.txt")
    lines = [f"{key} = {value}" for key, value in fields.items()]
    meta_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return meta_path
