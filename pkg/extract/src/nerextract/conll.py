"""Minimal CoNLL-2003 reading: sentence boundaries and surfaces only.

The exporter never re-tokenizes; the surfaces read here are passed to the
encoder and parser pre-split, and written back byte-for-byte.
"""

from __future__ import annotations

from pathlib import Path


class ExtractError(Exception):
    pass


def read_sentences(path: str | Path) -> list[list[str]]:
    """Surfaces per sentence; -DOCSTART- lines are structure, not tokens."""
    sentences: list[list[str]] = []
    current: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                if current:
                    sentences.append(current)
                    current = []
                continue
            cols = line.split()
            if cols[0] == "-DOCSTART-":
                if current:
                    sentences.append(current)
                    current = []
                continue
            if len(cols) < 2:
                raise ExtractError(f"{path}:{lineno}: expected >= 2 columns")
            current.append(cols[0])
    if current:
        sentences.append(current)
    return sentences
