"""Command-line surface: train, eval, predict, validate, stats, ablate.

Configuration comes from an optional flat ``key = value`` file plus CLI
flags; flags win. Every command writes a deterministic ``report.json``
echoing the fully resolved config (wall-clock timing goes to stderr only,
so identical config+seed reruns produce byte-identical reports).

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from .corpus import (
    Corpus,
    IOB1,
    IOB2,
    attach_deps,
    corpus_stats,
    default_tagset,
    parse_conll,
    parse_conllu_deps,
)
from .embedio import (
    ContextualFile,
    WordVectors,
    load_glove,
    read_ctxe_path,
    validate_ctxe_against_corpus,
)
from .errors import ConfigError, DataError, NerfusionError, NumericError
from .fusion import (
    AblationInputs,
    JointModel,
    MODE_CONTEXTUAL,
    MODE_GLOBAL,
    MODE_JOINT,
    MODES,
    TrainConfig,
    ablation_run,
    evaluate_model,
    load_joint_model,
    predict,
    save_joint_model,
    train_joint,
)
from .gcn import GcnConfig, TAP_LAYER1, TAP_LAYER2
from .metrics import format_report, report_record

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


@dataclass
class RunConfig:
    train_conll: str | None = None
    train_deps: str | None = None
    train_ctxe: str | None = None
    test_conll: str | None = None
    test_deps: str | None = None
    test_ctxe: str | None = None
    glove: str | None = None
    glove_dim: int | None = None
    model: str | None = None
    out: str | None = None
    mode: str = MODE_JOINT
    seed: int = 0
    tag_scheme: str = "iob1"
    batch_size: int = 16
    learning_rate: float = 5e-5
    epochs: int = 4
    dropout: float = 0.5
    dropout_stage: str = "fused"
    optimizer: str = "sgd"
    gcn_hidden: int = 128
    gcn_dropout: float = 0.5
    gcn_global_dim: int = 128
    gcn_tap: str = TAP_LAYER2
    strict: bool = False

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.tag_scheme.upper() not in (IOB1, IOB2):
            raise ConfigError(f"unknown tag scheme {self.tag_scheme!r}")
        if self.gcn_tap not in (TAP_LAYER1, TAP_LAYER2):
            raise ConfigError(f"unknown gcn tap {self.gcn_tap!r}")

    def resolved(self) -> dict:
        return dataclasses.asdict(self)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            dropout=self.dropout,
            dropout_stage=self.dropout_stage,
            seed=self.seed,
            mode=self.mode,
            optimizer=self.optimizer,
        )

    def gcn_config(self) -> GcnConfig:
        return GcnConfig(
            hidden_dim=self.gcn_hidden,
            dropout_rate=self.gcn_dropout,
            seed=self.seed,
            global_dim=self.gcn_global_dim,
            tap=self.gcn_tap,
        )


_FIELD_TYPES = {
    "glove_dim": int,
    "seed": int,
    "batch_size": int,
    "epochs": int,
    "gcn_hidden": int,
    "gcn_global_dim": int,
    "learning_rate": float,
    "dropout": float,
    "gcn_dropout": float,
    "strict": bool,
}


def parse_config_file(path: str) -> dict:
    """Flat ``key = value`` lines; '#' starts a comment."""
    values: dict = {}
    known = {f.name for f in dataclasses.fields(RunConfig)}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, value, f"{path}:{lineno}")
    return values


def _coerce(key: str, value: str, where: str):
    typ = _FIELD_TYPES.get(key, str)
    try:
        if typ is bool:
            if value.lower() in ("true", "1", "yes"):
                return True
            if value.lower() in ("false", "0", "no"):
                return False
            raise ValueError(value)
        return typ(value)
    except ValueError:
        raise ConfigError(f"{where}: bad value {value!r} for {key!r}") from None


def build_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    for f in dataclasses.fields(RunConfig):
        flag_value = getattr(args, f.name, None)
        if flag_value is not None:
            values[f.name] = flag_value
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# input loading helpers


def _require(cfg: RunConfig, key: str, why: str) -> str:
    value = getattr(cfg, key)
    if value is None:
        raise ConfigError(f"{why} requires --{key.replace('_', '-')} (config key {key!r})")
    return value


def _load_corpus(cfg: RunConfig, conll_key: str, deps_key: str | None) -> Corpus:
    path = _require(cfg, conll_key, "this command")
    scheme = cfg.tag_scheme.upper()
    tagset = default_tagset(IOB1 if scheme == IOB1 else IOB2)
    with open(path, encoding="utf-8") as fh:
        corpus = parse_conll(fh, tagset)
    if deps_key is not None:
        deps_path = _require(cfg, deps_key, f"mode {cfg.mode!r}")
        with open(deps_path, encoding="utf-8") as fh:
            corpus = attach_deps(corpus, parse_conllu_deps(fh))
    return corpus


def _load_glove(cfg: RunConfig) -> WordVectors:
    path = _require(cfg, "glove", f"mode {cfg.mode!r}")
    with open(path, encoding="utf-8") as fh:
        return load_glove(fh, cfg.glove_dim)


def _load_ctxe(cfg: RunConfig, key: str) -> ContextualFile:
    return read_ctxe_path(_require(cfg, key, f"mode {cfg.mode!r}"))


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(_require(cfg, "out", "this command"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _mode_of_model(model: JointModel) -> str:
    return model.mode


# ---------------------------------------------------------------------------
# commands


def cmd_train(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    corpus = _load_corpus(
        cfg, "train_conll", "train_deps" if cfg.mode != MODE_CONTEXTUAL else None
    )
    if not len(corpus):
        raise DataError("training corpus is empty")
    wv = _load_glove(cfg) if cfg.mode != MODE_CONTEXTUAL else None
    ctx = _load_ctxe(cfg, "train_ctxe") if cfg.mode != MODE_GLOBAL else None
    t0 = time.monotonic()
    model, losses = train_joint(corpus, wv, ctx, cfg.gcn_config(), cfg.train_config())
    logger.info("trained %s model in %.2fs", cfg.mode, time.monotonic() - t0)
    model_path = out / "model.fuse"
    with open(model_path, "wb") as fh:
        save_joint_model(model, fh)
    _write_json(
        out / "report.json",
        {
            "command": "train",
            "config": cfg.resolved(),
            "n_sentences": len(corpus),
            "n_tokens": sum(len(s) for s in corpus),
            "per_epoch_loss": losses,
            "final_loss": losses[-1],
            "model_file": model_path.name,
        },
    )
    print(f"trained {cfg.mode} model: final loss {losses[-1]:.6f} -> {model_path}")
    return EXIT_OK


def _load_model_and_inputs(cfg: RunConfig):
    model_path = cfg.model
    if model_path is None:
        raise ConfigError("this command requires --model")
    with open(model_path, "rb") as fh:
        model = load_joint_model(fh, tap=cfg.gcn_tap if cfg.gcn_tap != TAP_LAYER2 else None)
    mode = _mode_of_model(model)
    corpus = _load_corpus(
        cfg, "test_conll", "test_deps" if mode != MODE_CONTEXTUAL else None
    )
    if not len(corpus):
        raise DataError("test corpus is empty")
    wv = _load_glove(cfg) if mode != MODE_CONTEXTUAL else None
    ctx = _load_ctxe(cfg, "test_ctxe") if mode != MODE_GLOBAL else None
    return model, corpus, wv, ctx


def cmd_eval(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    model, corpus, wv, ctx = _load_model_and_inputs(cfg)
    outcome = evaluate_model(corpus, model, wv, ctx)
    print(format_report(outcome.relaxed))
    record = report_record(outcome.relaxed)
    _write_json(out / "eval_report.json", record)
    payload = {
        "command": "eval",
        "config": cfg.resolved(),
        "metric": "relaxed",
        "relaxed": record,
        "token_accuracy": outcome.token_accuracy,
    }
    if cfg.strict:
        print()
        print("strict (exact span) scores:")
        print(format_report(outcome.strict))
        payload["strict"] = report_record(outcome.strict)
    _write_json(out / "report.json", payload)
    return EXIT_OK


def cmd_predict(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    model, corpus, wv, ctx = _load_model_and_inputs(cfg)
    tags_by_sentence = []
    for sent in corpus:
        ctx_sent = ctx.sentences[sent.sent_id] if model.ctx_dim else None
        tags_by_sentence.append(predict(sent, model, corpus.tagset, wv, ctx_sent).tags)

    in_path = cfg.test_conll
    out_lines = []
    sent_idx, tok_idx = 0, 0
    with open(in_path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                if tok_idx:
                    sent_idx, tok_idx = sent_idx + 1, 0
                out_lines.append(line)
            elif line.split()[0] == "-DOCSTART-":
                out_lines.append(line + " O")
            else:
                out_lines.append(line + " " + tags_by_sentence[sent_idx][tok_idx])
                tok_idx += 1
    if tok_idx:
        sent_idx += 1
    pred_path = out / "predictions.conll"
    pred_path.write_text("\n".join(out_lines) + "\n", encoding="utf-8")
    _write_json(
        out / "report.json",
        {
            "command": "predict",
            "config": cfg.resolved(),
            "n_sentences": len(corpus),
            "predictions_file": pred_path.name,
        },
    )
    print(f"wrote predictions for {len(corpus)} sentences -> {pred_path}")
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    checked = 0
    violations: list[str] = []
    for split in ("train", "test"):
        conll = getattr(cfg, f"{split}_conll")
        if conll is None:
            continue
        tagset = default_tagset(IOB1 if cfg.tag_scheme.upper() == IOB1 else IOB2)
        with open(conll, encoding="utf-8") as fh:
            corpus = parse_conll(fh, tagset)
        deps = getattr(cfg, f"{split}_deps")
        if deps is not None:
            checked += 1
            with open(deps, encoding="utf-8") as fh:
                try:
                    attach_deps(corpus, parse_conllu_deps(fh))
                except DataError as exc:
                    violations.append(f"{split} deps: {exc}")
        ctxe = getattr(cfg, f"{split}_ctxe")
        if ctxe is not None:
            checked += 1
            found = validate_ctxe_against_corpus(read_ctxe_path(ctxe), corpus)
            violations.extend(f"{split} ctxe: {v}" for v in found)
    if checked == 0:
        raise ConfigError("nothing to validate: provide deps and/or ctxe paths")
    for v in violations:
        print(v)
    if cfg.out:
        _write_json(
            _out_dir(cfg) / "report.json",
            {
                "command": "validate",
                "config": cfg.resolved(),
                "checked": checked,
                "violations": violations,
                "ok": not violations,
            },
        )
    if violations:
        raise DataError(f"{len(violations)} validation violation(s)")
    print(f"ok: {checked} pairing(s) validated")
    return EXIT_OK


def cmd_stats(cfg: RunConfig) -> int:
    conll_key = "train_conll" if cfg.train_conll else "test_conll"
    deps_key = None
    if getattr(cfg, conll_key.replace("conll", "deps")):
        deps_key = conll_key.replace("conll", "deps")
    corpus = _load_corpus(cfg, conll_key, deps_key)
    stats = corpus_stats(corpus)
    top = sorted(stats.surface_mentions.items(), key=lambda kv: (-kv[1], kv[0]))[:10]
    print(
        f"{stats.n_documents} documents, {stats.n_sentences} sentences, "
        f"{stats.n_tokens} tokens, {stats.n_entities} entities"
    )
    for etype, count in stats.entity_counts.items():
        print(f"  {etype}: {count}")
    print("top entity-mention surfaces:")
    for surface, count in top:
        print(f"  {surface}: {count}")
    if cfg.out:
        _write_json(
            _out_dir(cfg) / "stats.json",
            {"command": "stats", "config": cfg.resolved(), "stats": stats.as_dict()},
        )
    return EXIT_OK


def cmd_ablate(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    train_corpus = _load_corpus(cfg, "train_conll", "train_deps")
    test_corpus = _load_corpus(cfg, "test_conll", "test_deps")
    wv = _load_glove(cfg)
    inputs = AblationInputs(
        wv=wv,
        ctx_train=_load_ctxe(cfg, "train_ctxe"),
        ctx_test=_load_ctxe(cfg, "test_ctxe"),
        gcn_cfg=cfg.gcn_config(),
    )
    result = ablation_run(train_corpus, test_corpus, inputs, cfg.train_config())
    print(result.table())
    _write_json(
        out / "report.json",
        {
            "command": "ablate",
            "config": cfg.resolved(),
            "f1": {mode: result.f1(mode) for mode in MODES},
            "reports": {mode: report_record(r) for mode, r in result.reports.items()},
        },
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--mode", choices=MODES, default=None)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--tag-scheme", dest="tag_scheme", choices=["iob1", "iob2"], default=None)
    for key in (
        "train_conll",
        "train_deps",
        "train_ctxe",
        "test_conll",
        "test_deps",
        "test_ctxe",
        "glove",
        "model",
    ):
        p.add_argument("--" + key.replace("_", "-"), dest=key, default=None)
    p.add_argument("--glove-dim", dest="glove_dim", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument(
        "--dropout-stage", dest="dropout_stage", choices=["fused", "parts"], default=None
    )
    p.add_argument("--optimizer", choices=["sgd", "adam"], default=None)
    p.add_argument("--gcn-hidden", dest="gcn_hidden", type=int, default=None)
    p.add_argument("--gcn-dropout", dest="gcn_dropout", type=float, default=None)
    p.add_argument("--gcn-global-dim", dest="gcn_global_dim", type=int, default=None)
    p.add_argument("--gcn-tap", dest="gcn_tap", choices=[TAP_LAYER1, TAP_LAYER2], default=None)
    p.add_argument("--strict", action="store_const", const=True, default=None)


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "validate": cmd_validate,
    "stats": cmd_stats,
    "ablate": cmd_ablate,
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nerfusion",
        description="NER with graph-convolutional global features fused with contextual embeddings",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        _add_common(sub.add_parser(name))
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s: %(message)s")
    args = make_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FileNotFoundError as exc:
        print(f"config error: missing file {exc.filename}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, NerfusionError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
