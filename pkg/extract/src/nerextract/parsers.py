"""Dependency-parser backends emitting CoNLL-U over pre-tokenized input.

Backends never re-tokenize: column 2 of the output equals the corpus
surface byte-for-byte, one line per token, exactly one HEAD each.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

from .conll import ExtractError


class SpacyParser:
    """Universal-dependencies parse via a spaCy pipeline on pre-made docs."""

    def __init__(self, model: str = "en_core_web_sm"):
        try:
            import spacy
            from spacy.tokens import Doc
        except ImportError as exc:
            raise ExtractError(f"spacy backend unavailable: {exc}") from None
        try:
            self.nlp = spacy.load(model)
        except Exception as exc:
            raise ExtractError(f"spacy model {model!r} not available locally: {exc}") from None
        self._doc_cls = Doc
        self.name = f"spacy:{model}"

    def parse(self, sent_id: int, words: list[str]) -> list[tuple[int, str, str]]:
        doc = self._doc_cls(self.nlp.vocab, words=words)
        for _, proc in self.nlp.pipeline:
            doc = proc(doc)
        if len(doc) != len(words):
            raise ExtractError(
                f"sentence {sent_id}: parser produced {len(doc)} tokens for {len(words)} words"
            )
        rows = []
        for tok in doc:
            head = 0 if tok.head.i == tok.i else tok.head.i + 1
            rows.append((head, tok.dep_ or "dep", tok.pos_ or "_"))
        return rows


class ChainParser:
    """Deterministic offline backend: each token attaches to the previous one."""

    name = "chain"

    def parse(self, sent_id: int, words: list[str]) -> list[tuple[int, str, str]]:
        return [(i, "root" if i == 0 else "dep", "_") for i in range(len(words))]


def make_parser(backend: str, **kwargs):
    if backend == "spacy":
        return SpacyParser(**kwargs)
    if backend == "chain":
        kwargs.pop("model", None)
        return ChainParser()
    raise ExtractError(f"unknown parser backend {backend!r}")


def write_conllu(
    path: str | Path,
    sentences: Iterable[list[str]],
    parser,
) -> int:
    """Parse every sentence and write standard 10-column CoNLL-U."""
    lines: list[str] = []
    count = 0
    for sent_id, words in enumerate(sentences):
        rows = parser.parse(sent_id, words)
        if len(rows) != len(words):
            raise ExtractError(f"sentence {sent_id}: token count drift in parser output")
        lines.append(f"# sent_id = {sent_id}")
        for i, (word, (head, rel, upos)) in enumerate(zip(words, rows), start=1):
            lines.append(f"{i}\t{word}\t_\t{upos}\t_\t_\t{head}\t{rel}\t_\t_")
        lines.append("")
        count += 1
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return count
