"""Encoder backends producing per-sentence subword vectors and masks.

Every backend receives pre-split words and must return one row per
subword with a mask carrying 1 exactly at each word's first subword.
Alignment always comes from the tokenizer's own word mapping, never from
whitespace heuristics (CoNLL surfaces contain forms like "U.S.").
"""

from __future__ import annotations

import hashlib

import numpy as np

from .conll import ExtractError

DEFAULT_ENCODER = "xlnet-base-cased"
DEFAULT_MAX_LEN = 512


class XlnetEncoder:
    """Pretrained transformer backend (eval mode, hidden states only).

    ``layer_tap`` is ``final`` for the last hidden layer or ``layer:<k>``
    for an intermediate one. Over-length sentences abort; nothing is
    truncated silently.
    """

    def __init__(
        self,
        model_name: str = DEFAULT_ENCODER,
        layer_tap: str = "final",
        max_len: int = DEFAULT_MAX_LEN,
    ):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise ExtractError(f"transformers backend unavailable: {exc}") from None
        self._torch = torch
        self.model_name = model_name
        self.layer_tap = layer_tap
        self.max_len = max_len
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model_name, use_fast=True)
            need_hidden = layer_tap != "final"
            self.model = AutoModel.from_pretrained(
                model_name, output_hidden_states=need_hidden
            ).eval()
        except Exception as exc:
            raise ExtractError(
                f"pretrained encoder {model_name!r} not available locally: {exc}"
            ) from None
        self.dim = int(self.model.config.hidden_size)
        self.tokenizer_version = (
            f"{type(self.tokenizer).__name__}:{getattr(self.tokenizer, 'name_or_path', model_name)}"
        )

    def encode(self, sent_id: int, words: list[str]) -> tuple[list[int], np.ndarray]:
        enc = self.tokenizer(
            words,
            is_split_into_words=True,
            return_tensors="pt",
            add_special_tokens=True,
        )
        n_tokens = enc["input_ids"].shape[1]
        if n_tokens > self.max_len:
            raise ExtractError(
                f"sentence {sent_id}: {n_tokens} subword tokens exceed max length "
                f"{self.max_len}; refusing to truncate"
            )
        word_ids = enc.word_ids(0)
        with self._torch.no_grad():
            out = self.model(**enc)
        if self.layer_tap == "final":
            hidden = out.last_hidden_state[0]
        else:
            layer = int(self.layer_tap.split(":", 1)[1])
            hidden = out.hidden_states[layer][0]

        bits: list[int] = []
        rows: list[np.ndarray] = []
        seen: set[int] = set()
        for pos, wid in enumerate(word_ids):
            if wid is None:
                continue  # special tokens carry no word
            bits.append(0 if wid in seen else 1)
            seen.add(wid)
            rows.append(hidden[pos].numpy().astype(np.float32))
        if sorted(seen) != list(range(len(words))):
            raise ExtractError(
                f"sentence {sent_id}: tokenizer aligned {len(seen)} of {len(words)} words"
            )
        return bits, np.stack(rows)


class HashedEncoder:
    """Deterministic offline backend for tests and dry runs.

    Words are split into character chunks standing in for subwords, and
    each chunk's vector is derived from a hash of its text, so identical
    inputs always produce byte-identical CTXE files.
    """

    def __init__(self, dim: int = 768, max_len: int = DEFAULT_MAX_LEN, chunk: int = 4):
        self.model_name = f"hashed-{dim}"
        self.layer_tap = "final"
        self.max_len = max_len
        self.dim = dim
        self.chunk = chunk
        self.tokenizer_version = f"chunk{chunk}"

    def subwords(self, word: str) -> list[str]:
        pieces = [word[i : i + self.chunk] for i in range(0, len(word), self.chunk)]
        return pieces or [word]

    def _vector(self, piece: str) -> np.ndarray:
        digest = hashlib.blake2b(piece.encode("utf-8"), digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        return rng.standard_normal(self.dim).astype(np.float32) * 0.5

    def encode(self, sent_id: int, words: list[str]) -> tuple[list[int], np.ndarray]:
        bits: list[int] = []
        rows: list[np.ndarray] = []
        for word in words:
            for k, piece in enumerate(self.subwords(word)):
                bits.append(1 if k == 0 else 0)
                rows.append(self._vector(piece))
        if len(bits) > self.max_len:
            raise ExtractError(
                f"sentence {sent_id}: {len(bits)} subword tokens exceed max length "
                f"{self.max_len}; refusing to truncate"
            )
        return bits, np.stack(rows)


def make_encoder(backend: str, **kwargs):
    if backend == "xlnet":
        return XlnetEncoder(**kwargs)
    if backend == "hashed":
        kwargs.pop("model_name", None)
        kwargs.pop("layer_tap", None)
        return HashedEncoder(**kwargs)
    raise ExtractError(f"unknown encoder backend {backend!r}")
