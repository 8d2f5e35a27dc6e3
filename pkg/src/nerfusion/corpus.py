"""CoNLL-2003 and CoNLL-U parsing, span encode/decode, corpus statistics.

Everything here is immutable after construction and safe to share across
threads. Tags are normalized to IOB2 at the single conversion point inside
``parse_conll``; the rest of the toolkit only ever sees IOB2.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

from .errors import (
    BadHeadIndex,
    CountMismatch,
    IndexOutOfRange,
    MalformedLine,
    OverlapError,
    UnknownTag,
)

logger = logging.getLogger(__name__)

ENTITY_TYPES = ("LOC", "MISC", "ORG", "PER")

#: Head sentinel for the syntactic root of a sentence.
ROOT = -1

IOB1 = "IOB1"
IOB2 = "IOB2"

DOCSTART = "-DOCSTART-"


def _iter_lines(text: str | IO[str] | Iterable[str]) -> Iterator[str]:
    """Yield lines with trailing LF/CRLF stripped."""
    if isinstance(text, str):
        lines: Iterable[str] = text.splitlines()
    else:
        lines = text
    for line in lines:
        yield line.rstrip("\n").rstrip("\r")


@dataclass(frozen=True)
class TagSet:
    """Ordered IOB label inventory; label order fixes the class indices."""

    labels: tuple[str, ...]
    scheme: str = IOB2

    def __post_init__(self) -> None:
        if self.scheme not in (IOB1, IOB2):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if "O" not in self.labels:
            raise ValueError("tagset must contain 'O'")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate labels in tagset")
        for label in self.labels:
            if label == "O":
                continue
            prefix, _, etype = label.partition("-")
            if prefix not in ("B", "I") or etype not in ENTITY_TYPES:
                raise ValueError(f"bad IOB label {label!r}")

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownTag(label) from None

    def label(self, idx: int) -> str:
        return self.labels[idx]

    def as_iob2(self) -> "TagSet":
        """Same label inventory, IOB2 scheme, B- labels guaranteed present."""
        labels = list(self.labels)
        for lab in self.labels:
            if lab.startswith("I-") and "B-" + lab[2:] not in labels:
                labels.insert(labels.index(lab), "B-" + lab[2:])
        return TagSet(tuple(labels), IOB2)


def default_tagset(scheme: str = IOB1) -> TagSet:
    """The CoNLL-2003 label inventory: O first, then B-/I- per type."""
    labels = ["O"]
    for etype in ENTITY_TYPES:
        labels += [f"B-{etype}", f"I-{etype}"]
    return TagSet(tuple(labels), scheme)


@dataclass(frozen=True)
class Token:
    surface: str
    gold_tag: str
    pos: str | None = None

    def __post_init__(self) -> None:
        if not self.surface:
            raise ValueError("empty token surface")


@dataclass(frozen=True)
class DepArc:
    dependent: int
    head: int  # token index or ROOT
    relation: str


@dataclass(frozen=True)
class EntitySpan:
    start: int  # inclusive
    end: int  # inclusive
    etype: str

    def __post_init__(self) -> None:
        if not 0 <= self.start <= self.end:
            raise ValueError(f"bad span ({self.start}, {self.end})")
        if self.etype not in ENTITY_TYPES:
            raise ValueError(f"unknown entity type {self.etype!r}")

    def overlaps(self, other: "EntitySpan") -> bool:
        return self.start <= other.end and other.start <= self.end


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]
    doc_id: int
    sent_id: int
    arcs: tuple[DepArc, ...] | None = None

    def __post_init__(self) -> None:
        if not self.tokens:
            raise ValueError("empty sentence")

    def __len__(self) -> int:
        return len(self.tokens)

    def surfaces(self) -> list[str]:
        return [t.surface for t in self.tokens]

    def tags(self) -> list[str]:
        return [t.gold_tag for t in self.tokens]


@dataclass(frozen=True)
class Corpus:
    sentences: tuple[Sentence, ...]
    tagset: TagSet

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self) -> Iterator[Sentence]:
        return iter(self.sentences)

    @property
    def n_documents(self) -> int:
        return len({s.doc_id for s in self.sentences})


def parse_conll(text: str | IO[str] | Iterable[str], tagset: TagSet) -> Corpus:
    """Parse CoNLL-2003 column data into a Corpus.

    Token lines carry >= 2 whitespace-separated columns with the NER tag
    last; blank lines close sentences; ``-DOCSTART-`` lines open a new
    document and emit no tokens. Tags are validated against ``tagset`` and
    normalized to IOB2 before the Corpus is built.
    """
    sentences: list[Sentence] = []
    tokens: list[Token] = []
    doc_id = 0
    seen_any = False

    def close_sentence() -> None:
        nonlocal tokens
        if tokens:
            sentences.append(Sentence(tuple(tokens), doc_id, len(sentences)))
            tokens = []

    for lineno, line in enumerate(_iter_lines(text), 1):
        if not line.strip():
            close_sentence()
            continue
        cols = line.split()
        if cols[0] == DOCSTART:
            close_sentence()
            if seen_any:
                doc_id += 1
            seen_any = True
            continue
        seen_any = True
        if len(cols) < 2:
            raise MalformedLine(lineno, f"expected >= 2 columns, got {len(cols)}: {line!r}")
        tag = cols[-1]
        if tag not in tagset:
            raise UnknownTag(tag, lineno)
        pos = cols[1] if len(cols) >= 3 else None
        tokens.append(Token(surface=cols[0], gold_tag=tag, pos=pos))
    close_sentence()

    corpus = Corpus(tuple(sentences), tagset)
    return _normalize_iob2(corpus)


def _normalize_iob2(corpus: Corpus) -> Corpus:
    """Re-encode every sentence's tags as IOB2 (identity if already IOB2-clean)."""
    scheme = corpus.tagset.scheme
    repairs: list[int] = []
    sentences = []
    for sent in corpus:
        spans = iob_to_spans(sent.tags(), scheme, repairs=repairs)
        new_tags = spans_to_iob(spans, len(sent), IOB2)
        toks = tuple(
            Token(t.surface, tag, t.pos) for t, tag in zip(sent.tokens, new_tags)
        )
        sentences.append(Sentence(toks, sent.doc_id, sent.sent_id, sent.arcs))
    if repairs and scheme == IOB2:
        logger.warning("repaired %d invalid IOB2 transitions while parsing", len(repairs))
    return Corpus(tuple(sentences), corpus.tagset.as_iob2())


def parse_conllu_deps(text: str | IO[str] | Iterable[str]) -> list[list[DepArc]]:
    """Parse CoNLL-U dependency annotations into per-sentence arc lists.

    Only the ID, HEAD, and DEPREL columns are consumed. Comment lines and
    multiword-range / empty-node IDs are skipped. Indices are converted to
    0-based with head 0 mapped to the ROOT sentinel.
    """
    arcs_per_sentence: list[list[DepArc]] = []
    current: list[tuple[int, int, str]] = []  # (id, head, relation), 1-based

    def close_sentence(lineno: int) -> None:
        if not current:
            return
        n = len(current)
        ids = [c[0] for c in current]
        if ids != list(range(1, n + 1)):
            raise MalformedLine(lineno, f"token IDs not contiguous from 1: {ids}")
        arcs = []
        for tok_id, head, rel in current:
            if head > n:
                raise BadHeadIndex(f"HEAD {head} > sentence length {n}")
            arcs.append(DepArc(tok_id - 1, ROOT if head == 0 else head - 1, rel))
        arcs_per_sentence.append(arcs)
        current.clear()

    lineno = 0
    for lineno, line in enumerate(_iter_lines(text), 1):
        if not line.strip():
            close_sentence(lineno)
            continue
        if line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise MalformedLine(lineno, f"expected 10 tab-separated columns, got {len(cols)}")
        tok_id = cols[0]
        if "-" in tok_id or "." in tok_id:
            continue  # multiword range / empty node
        try:
            idx = int(tok_id)
            head = int(cols[6])
        except ValueError as exc:
            raise MalformedLine(lineno, f"non-integer ID or HEAD: {exc}") from None
        if head < 0:
            raise BadHeadIndex(f"negative HEAD {head} on line {lineno}")
        current.append((idx, head, cols[7]))
    close_sentence(lineno + 1)
    return arcs_per_sentence


def attach_deps(corpus: Corpus, arcs: list[list[DepArc]]) -> Corpus:
    """Join dependency arcs onto a corpus, enforcing 1:1 sentence/token counts."""
    if len(arcs) != len(corpus):
        raise CountMismatch(
            f"corpus has {len(corpus)} sentences but dependency data has {len(arcs)}"
        )
    sentences = []
    for sent, sent_arcs in zip(corpus, arcs):
        if len(sent_arcs) != len(sent):
            raise CountMismatch(
                f"sentence {sent.sent_id}: {len(sent)} tokens but {len(sent_arcs)} arcs"
            )
        sentences.append(Sentence(sent.tokens, sent.doc_id, sent.sent_id, tuple(sent_arcs)))
    return Corpus(tuple(sentences), corpus.tagset)


def iob_to_spans(
    tags: list[str] | tuple[str, ...],
    scheme: str = IOB2,
    repairs: list[int] | None = None,
) -> list[EntitySpan]:
    """Decode an IOB sequence into typed spans.

    Under IOB1 an I-X after O or after a different type legitimately starts
    a span. Under IOB2 the same input is repaired as a span start; the token
    index of each repair is appended to ``repairs`` when given.
    """
    spans: list[EntitySpan] = []
    start: int | None = None
    cur: str | None = None

    def close(upto: int) -> None:
        nonlocal start, cur
        if start is not None and cur is not None:
            spans.append(EntitySpan(start, upto, cur))
        start, cur = None, None

    for i, tag in enumerate(tags):
        if tag == "O":
            close(i - 1)
            continue
        prefix, _, etype = tag.partition("-")
        if prefix == "B":
            close(i - 1)
            start, cur = i, etype
        elif prefix == "I":
            if cur == etype:
                continue  # continuation
            if scheme == IOB2:
                if repairs is not None:
                    repairs.append(i)
                logger.debug("IOB2 repair: I-%s at token %d treated as B-%s", etype, i, etype)
            close(i - 1)
            start, cur = i, etype
        else:
            raise UnknownTag(tag)
    close(len(tags) - 1)
    return spans


def spans_to_iob(
    spans: list[EntitySpan],
    length: int,
    scheme: str = IOB2,
) -> list[str]:
    """Encode typed spans as an IOB sequence of ``length`` labels."""
    ordered = sorted(spans, key=lambda s: s.start)
    prev_end = -1
    prev_type: str | None = None
    tags = ["O"] * length
    for span in ordered:
        if span.end >= length:
            raise IndexOutOfRange(f"span {span} exceeds sentence length {length}")
        if span.start <= prev_end:
            raise OverlapError(f"span {span} overlaps a previous span")
        if scheme == IOB2:
            first = "B-" + span.etype
        else:
            adjacent_same = span.start == prev_end + 1 and span.etype == prev_type
            first = ("B-" if adjacent_same else "I-") + span.etype
        tags[span.start] = first
        for i in range(span.start + 1, span.end + 1):
            tags[i] = "I-" + span.etype
        prev_end, prev_type = span.end, span.etype
    return tags


@dataclass(frozen=True)
class Stats:
    n_documents: int
    n_sentences: int
    n_tokens: int
    entity_counts: dict[str, int]
    n_entities: int
    surface_mentions: dict[str, int]
    dep_relations: tuple[str, ...] = ()
    pos_tags: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "n_documents": self.n_documents,
            "n_sentences": self.n_sentences,
            "n_tokens": self.n_tokens,
            "entity_counts": dict(self.entity_counts),
            "n_entities": self.n_entities,
            "surface_mentions": dict(self.surface_mentions),
            "dep_relations": list(self.dep_relations),
            "pos_tags": list(self.pos_tags),
        }


def corpus_stats(corpus: Corpus) -> Stats:
    """Deterministic corpus-level counts.

    ``surface_mentions`` counts every token occurrence inside an entity
    span, keyed by surface form.
    """
    entity_counts: Counter[str] = Counter()
    mentions: Counter[str] = Counter()
    dep_labels: set[str] = set()
    pos_tags: set[str] = set()
    n_tokens = 0
    for sent in corpus:
        n_tokens += len(sent)
        for span in iob_to_spans(sent.tags(), IOB2):
            entity_counts[span.etype] += 1
            for i in range(span.start, span.end + 1):
                mentions[sent.tokens[i].surface] += 1
        if sent.arcs:
            dep_labels.update(a.relation for a in sent.arcs)
        pos_tags.update(t.pos for t in sent.tokens if t.pos is not None)
    return Stats(
        n_documents=corpus.n_documents,
        n_sentences=len(corpus),
        n_tokens=n_tokens,
        entity_counts={t: entity_counts.get(t, 0) for t in ENTITY_TYPES},
        n_entities=sum(entity_counts.values()),
        surface_mentions=dict(sorted(mentions.items())),
        dep_relations=tuple(sorted(dep_labels)),
        pos_tags=tuple(sorted(pos_tags)),
    )
