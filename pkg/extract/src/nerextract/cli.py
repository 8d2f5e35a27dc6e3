"""CLI verbs: ``contextual`` (CTXE export) and ``deps`` (CoNLL-U export).

Exit codes: 0 success, 2 config error, 3 extraction/data error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .conll import ExtractError, read_sentences
from .ctxe import write_ctxe, write_sidecar
from .encoders import DEFAULT_ENCODER, DEFAULT_MAX_LEN, make_encoder
from .parsers import make_parser, write_conllu

logger = logging.getLogger(__name__)


def cmd_contextual(args: argparse.Namespace) -> int:
    sentences = read_sentences(args.conll)
    kwargs = {"max_len": args.max_len}
    if args.backend == "xlnet":
        kwargs.update(model_name=args.encoder_name, layer_tap=args.layer_tap)
    else:
        kwargs.update(dim=args.ctx_dim)
    encoder = make_encoder(args.backend, **kwargs)

    def encoded():
        for sid, words in enumerate(sentences):
            bits, vectors = encoder.encode(sid, words)
            if sum(bits) != len(words):  # mask law, checked before anything is written
                raise ExtractError(
                    f"sentence {sid}: mask sums to {sum(bits)} for {len(words)} words"
                )
            yield bits, vectors

    count = write_ctxe(args.out, encoder.dim, encoded())
    meta = write_sidecar(
        args.out,
        {
            "encoder": encoder.model_name,
            "layer_tap": encoder.layer_tap,
            "tokenizer": encoder.tokenizer_version,
            "ctx_dim": str(encoder.dim),
            "sentences": str(count),
        },
    )
    print(f"wrote {count} sentences, ctx_dim {encoder.dim} -> {args.out} (+ {meta.name})")
    return 0


def cmd_deps(args: argparse.Namespace) -> int:
    sentences = read_sentences(args.conll)
    parser = make_parser(args.backend, model=args.parser_model)
    count = write_conllu(args.out, sentences, parser)
    print(f"wrote {count} parsed sentences -> {args.out}")
    return 0


def make_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nerextract",
        description="Export contextual-embedding containers and dependency parses "
        "for the nerfusion toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ctx = sub.add_parser("contextual", help="write a CTXE file + metadata sidecar")
    ctx.add_argument("--conll", required=True, help="input CoNLL-2003 file")
    ctx.add_argument("--out", required=True, help="output CTXE path")
    ctx.add_argument("--backend", choices=["xlnet", "hashed"], default="xlnet")
    ctx.add_argument("--encoder-name", default=DEFAULT_ENCODER)
    ctx.add_argument("--layer-tap", default="final", help='"final" or "layer:<k>"')
    ctx.add_argument("--max-len", type=int, default=DEFAULT_MAX_LEN)
    ctx.add_argument("--ctx-dim", type=int, default=768, help="hashed backend width")
    ctx.set_defaults(func=cmd_contextual)

    deps = sub.add_parser("deps", help="write a CoNLL-U dependency file")
    deps.add_argument("--conll", required=True, help="input CoNLL-2003 file")
    deps.add_argument("--out", required=True, help="output CoNLL-U path")
    deps.add_argument("--backend", choices=["spacy", "chain"], default="spacy")
    deps.add_argument("--parser-model", default="en_core_web_sm")
    deps.set_defaults(func=cmd_deps)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s: %(message)s")
    args = make_arg_parser().parse_args(argv)
    try:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"config error: missing file {exc.filename}", file=sys.stderr)
        return 2
    except ExtractError as exc:
        print(f"extraction error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
