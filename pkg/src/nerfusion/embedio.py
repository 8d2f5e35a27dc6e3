"""Static word vectors and the CTXE contextual-embedding container.

CTXE layout (all integers little-endian): magic ``CTXE``; u32 version = 1;
u32 ctx_dim; u32 sentence_count; then per sentence: u32 sent_id;
u32 subword_count; u32 word_count; subword_count mask bytes (each 0 or 1);
subword_count x ctx_dim IEEE-754 binary32 little-endian, row-major.
"""

from __future__ import annotations

import io
import logging
import struct
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from .corpus import Corpus
from .errors import (
    BadMagic,
    BadVersion,
    CtxeFormatError,
    DimMismatch,
    MaskSumMismatch,
    ParseError,
    TruncatedFile,
)

logger = logging.getLogger(__name__)

CTXE_MAGIC = b"CTXE"
CTXE_VERSION = 1


@dataclass(frozen=True)
class WordVectors:
    dim: int
    table: dict[str, np.ndarray]


def load_glove(
    text: str | IO[str] | Iterable[str],
    expected_dim: int | None = None,
) -> WordVectors:
    """Load GloVe text format: ``surface c1 ... c_dim`` per line.

    ``expected_dim`` of None means: infer from the first line. Duplicate
    surfaces keep the first occurrence (logged).
    """
    if isinstance(text, str):
        lines: Iterable[str] = text.splitlines()
    else:
        lines = text
    table: dict[str, np.ndarray] = {}
    dim = expected_dim
    for lineno, line in enumerate(lines, 1):
        line = line.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) < 2:
            raise ParseError(lineno, "expected a surface and at least one component")
        surface = fields[0]
        if dim is not None and len(fields) - 1 != dim:
            raise DimMismatch(lineno, len(fields) - 1, dim)
        try:
            vec = np.array([float(x) for x in fields[1:]], dtype=np.float64)
        except ValueError as exc:
            raise ParseError(lineno, f"bad float: {exc}") from None
        if dim is None:
            dim = vec.shape[0]
        if surface in table:
            logger.warning("duplicate vector for %r at line %d kept first", surface, lineno)
            continue
        vec.setflags(write=False)
        table[surface] = vec
    return WordVectors(dim=dim if dim is not None else (expected_dim or 0), table=table)


def lookup(wv: WordVectors, surface: str) -> np.ndarray:
    """Exact match, then lowercase fallback, then the zero vector (OOV)."""
    vec = wv.table.get(surface)
    if vec is None:
        vec = wv.table.get(surface.lower())
    if vec is None:
        return np.zeros(wv.dim, dtype=np.float64)
    return vec


@dataclass(frozen=True)
class AlignmentMask:
    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("mask bits must be 0 or 1")

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def word_count(self) -> int:
        return sum(self.bits)

    def word_positions(self) -> np.ndarray:
        """Subword indices carrying bit 1, in order."""
        return np.flatnonzero(np.asarray(self.bits))


@dataclass(frozen=True)
class ContextualSentence:
    sent_id: int
    mask: AlignmentMask
    vectors: np.ndarray  # subword_count x ctx_dim, float32

    def __post_init__(self) -> None:
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.mask):
            raise ValueError(
                f"sentence {self.sent_id}: {self.vectors.shape[0]} vector rows "
                f"for {len(self.mask)} mask bits"
            )

    @property
    def word_count(self) -> int:
        return self.mask.word_count


@dataclass(frozen=True)
class ContextualFile:
    ctx_dim: int
    sentences: tuple[ContextualSentence, ...]

    def __post_init__(self) -> None:
        for i, sent in enumerate(self.sentences):
            if sent.sent_id != i:
                raise ValueError(f"sent_ids must increase from 0, got {sent.sent_id} at {i}")
            if sent.vectors.shape[1] != self.ctx_dim:
                raise ValueError(
                    f"sentence {i}: ctx_dim {sent.vectors.shape[1]} != {self.ctx_dim}"
                )

    def __len__(self) -> int:
        return len(self.sentences)


def write_ctxe(file: ContextualFile, sink: IO[bytes]) -> None:
    """Serialize to the CTXE binary layout (bit-exact, little-endian)."""
    sink.write(CTXE_MAGIC)
    sink.write(struct.pack("<III", CTXE_VERSION, file.ctx_dim, len(file.sentences)))
    for sent in file.sentences:
        n_sub = len(sent.mask)
        sink.write(struct.pack("<III", sent.sent_id, n_sub, sent.word_count))
        sink.write(bytes(sent.mask.bits))
        sink.write(np.ascontiguousarray(sent.vectors, dtype="<f4").tobytes())


def write_ctxe_path(file: ContextualFile, path) -> None:
    with open(path, "wb") as fh:
        write_ctxe(file, fh)


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFile(
                f"needed {n} bytes at offset {self.pos}, file has {len(self.data)}"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def read_ctxe(source: IO[bytes] | bytes) -> ContextualFile:
    """Parse and fully validate a CTXE container."""
    data = source if isinstance(source, bytes) else source.read()
    cur = _Cursor(data)
    if cur.take(4) != CTXE_MAGIC:
        raise BadMagic("not a CTXE file")
    version = cur.u32()
    if version != CTXE_VERSION:
        raise BadVersion(f"unsupported CTXE version {version}")
    ctx_dim = cur.u32()
    n_sentences = cur.u32()
    sentences = []
    for i in range(n_sentences):
        sent_id = cur.u32()
        if sent_id != i:
            raise CtxeFormatError(f"sent_id {sent_id} at position {i}: must increase from 0")
        n_sub = cur.u32()
        word_count = cur.u32()
        mask_bytes = cur.take(n_sub)
        if any(b not in (0, 1) for b in mask_bytes):
            raise CtxeFormatError(f"sentence {sent_id}: mask byte outside {{0,1}}")
        if sum(mask_bytes) != word_count:
            raise MaskSumMismatch.for_sentence(sent_id, sum(mask_bytes), word_count)
        raw = cur.take(n_sub * ctx_dim * 4)
        vectors = np.frombuffer(raw, dtype="<f4").reshape(n_sub, ctx_dim).copy()
        vectors.setflags(write=False)
        sentences.append(
            ContextualSentence(sent_id, AlignmentMask(tuple(mask_bytes)), vectors)
        )
    if cur.pos != len(data):
        raise CtxeFormatError(f"{len(data) - cur.pos} trailing bytes after last sentence")
    return ContextualFile(ctx_dim, tuple(sentences))


def read_ctxe_path(path) -> ContextualFile:
    with open(path, "rb") as fh:
        return read_ctxe(fh)


def validate_ctxe_against_corpus(file: ContextualFile, corpus: Corpus) -> list[str]:
    """Cross-check a CTXE file against a corpus; returns the first 10 violations."""
    violations: list[str] = []
    if len(file) != len(corpus):
        violations.append(
            f"sentence count mismatch: CTXE has {len(file)}, corpus has {len(corpus)}"
        )
    for sent, ctx in zip(corpus, file.sentences):
        if ctx.word_count != len(sent):
            violations.append(
                f"sentence {sent.sent_id}: corpus has {len(sent)} words, "
                f"CTXE word_count is {ctx.word_count}"
            )
        if len(violations) >= 10:
            break
    return violations[:10]


def ctxe_to_bytes(file: ContextualFile) -> bytes:
    buf = io.BytesIO()
    write_ctxe(file, buf)
    return buf.getvalue()
