"""Relaxed and strict micro-averaged span precision/recall/F1.

Relaxed counting: a predicted span is correct if it token-overlaps at
least one gold span of the same type in the same sentence, and a gold
span is recalled if it overlaps at least one same-type predicted span.
Each span is counted once regardless of how many overlaps it has. Micro
scores pool counts over all types; per-type scores restrict counts to
that type. Percentages are reported to 2 decimals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .corpus import ENTITY_TYPES, EntitySpan
from .errors import LengthMismatch

SentSpans = Sequence[Sequence[EntitySpan]]


@dataclass(frozen=True)
class SpanCounts:
    tp_pred: int = 0  # predicted spans matching some gold span
    tp_gold: int = 0  # gold spans matched by some prediction
    n_pred: int = 0
    n_gold: int = 0

    def __add__(self, other: "SpanCounts") -> "SpanCounts":
        return SpanCounts(
            self.tp_pred + other.tp_pred,
            self.tp_gold + other.tp_gold,
            self.n_pred + other.n_pred,
            self.n_gold + other.n_gold,
        )


@dataclass(frozen=True)
class Prf:
    precision: float
    recall: float
    f1: float


def _prf(c: SpanCounts) -> Prf:
    p = 100.0 * c.tp_pred / c.n_pred if c.n_pred else 0.0
    r = 100.0 * c.tp_gold / c.n_gold if c.n_gold else 0.0
    f1 = 2.0 * p * r / (p + r) if p + r > 0.0 else 0.0
    return Prf(p, r, f1)


@dataclass(frozen=True)
class EvalReport:
    overall: Prf
    per_type: dict[str, Prf]
    counts: dict[str, SpanCounts]


def _report_from_counts(per_type: dict[str, SpanCounts]) -> EvalReport:
    pooled = SpanCounts()
    for c in per_type.values():
        pooled = pooled + c
    return EvalReport(
        overall=_prf(pooled),
        per_type={t: _prf(per_type[t]) for t in ENTITY_TYPES},
        counts=dict(per_type),
    )


def _check_parallel(gold: SentSpans, pred: SentSpans) -> None:
    if len(gold) != len(pred):
        raise LengthMismatch(f"{len(gold)} gold sentences vs {len(pred)} predicted")


def relaxed_prf(gold: SentSpans, pred: SentSpans) -> EvalReport:
    """Overlap-based scoring: any same-type token overlap counts."""
    _check_parallel(gold, pred)
    counts = {t: SpanCounts() for t in ENTITY_TYPES}
    for gold_sent, pred_sent in zip(gold, pred):
        for t in ENTITY_TYPES:
            g = [s for s in gold_sent if s.etype == t]
            p = [s for s in pred_sent if s.etype == t]
            tp_pred = sum(1 for ps in p if any(ps.overlaps(gs) for gs in g))
            tp_gold = sum(1 for gs in g if any(gs.overlaps(ps) for ps in p))
            counts[t] = counts[t] + SpanCounts(tp_pred, tp_gold, len(p), len(g))
    return _report_from_counts(counts)


def strict_prf(gold: SentSpans, pred: SentSpans) -> EvalReport:
    """Exact span-and-type matching."""
    _check_parallel(gold, pred)
    counts = {t: SpanCounts() for t in ENTITY_TYPES}
    for gold_sent, pred_sent in zip(gold, pred):
        for t in ENTITY_TYPES:
            g = {(s.start, s.end) for s in gold_sent if s.etype == t}
            p = {(s.start, s.end) for s in pred_sent if s.etype == t}
            tp = len(g & p)
            counts[t] = counts[t] + SpanCounts(tp, tp, len(p), len(g))
    return _report_from_counts(counts)


def format_report(r: EvalReport) -> str:
    """Fixed-width per-type table: LOC, MISC, ORG, PER, then overall."""
    lines = [f"{'Entity type':<12}{'Precision':>10}{'Recall':>10}{'F1-score':>10}"]
    for etype in ENTITY_TYPES:
        prf = r.per_type[etype]
        lines.append(
            f"{etype:<12}{prf.precision:>10.2f}{prf.recall:>10.2f}{prf.f1:>10.2f}"
        )
    o = r.overall
    lines.append(f"{'Overall':<12}{o.precision:>10.2f}{o.recall:>10.2f}{o.f1:>10.2f}")
    return "\n".join(lines)


def report_record(r: EvalReport) -> dict:
    """Machine-readable record: overall.{p,r,f1}, per_type.<TYPE>.{p,r,f1}, counts."""
    def prf_dict(prf: Prf) -> dict:
        return {
            "p": round(prf.precision, 2),
            "r": round(prf.recall, 2),
            "f1": round(prf.f1, 2),
        }

    return {
        "overall": prf_dict(r.overall),
        "per_type": {t: prf_dict(r.per_type[t]) for t in ENTITY_TYPES},
        "counts": {
            t: {
                "tp_pred": c.tp_pred,
                "tp_gold": c.tp_gold,
                "n_pred": c.n_pred,
                "n_gold": c.n_gold,
            }
            for t, c in sorted(r.counts.items())
        },
    }
