import numpy as np
import pytest

from helpers import overlap_oracle, random_span_sets
from nerfusion.corpus import ENTITY_TYPES, EntitySpan
from nerfusion.errors import LengthMismatch
from nerfusion.metrics import (
    EvalReport,
    Prf,
    SpanCounts,
    format_report,
    relaxed_prf,
    report_record,
    strict_prf,
)


def span(s, e, t):
    return EntitySpan(s, e, t)


# ---------------------------------------------------------------------------
# relaxed


def test_relaxed_partial_overlap_counts():
    r = relaxed_prf([[span(3, 4, "LOC")]], [[span(4, 4, "LOC")]])
    assert (r.overall.precision, r.overall.recall, r.overall.f1) == (100.0, 100.0, 100.0)


def test_relaxed_type_must_match():
    r = relaxed_prf([[span(3, 4, "LOC")]], [[span(3, 4, "PER")]])
    assert (r.overall.precision, r.overall.recall, r.overall.f1) == (0.0, 0.0, 0.0)


def test_relaxed_partial_recall():
    r = relaxed_prf([[span(0, 1, "PER"), span(5, 5, "ORG")]], [[span(0, 0, "PER")]])
    assert r.overall.precision == 100.0
    assert r.overall.recall == 50.0
    assert round(r.overall.f1, 2) == 66.67


def test_relaxed_same_sentence_only():
    r = relaxed_prf(
        [[span(0, 1, "LOC")], []],
        [[], [span(0, 1, "LOC")]],
    )
    assert r.overall.precision == 0.0 and r.overall.recall == 0.0


def test_counted_once_despite_multiple_overlaps():
    r = relaxed_prf(
        [[span(0, 5, "ORG")]],
        [[span(0, 1, "ORG"), span(3, 5, "ORG")]],
    )
    c = r.counts["ORG"]
    assert (c.tp_pred, c.tp_gold, c.n_pred, c.n_gold) == (2, 1, 2, 1)


# ---------------------------------------------------------------------------
# strict


def test_strict_exact_match_only():
    r = strict_prf([[span(3, 4, "LOC")]], [[span(3, 4, "LOC")]])
    assert r.overall.f1 == 100.0
    r2 = strict_prf([[span(3, 4, "LOC")]], [[span(4, 4, "LOC")]])
    assert (r2.overall.precision, r2.overall.recall, r2.overall.f1) == (0.0, 0.0, 0.0)


# ---------------------------------------------------------------------------
# properties


def random_cases(n_cases, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(n_cases):
        n_sents = int(rng.integers(1, 4))
        gold, pred = [], []
        for _ in range(n_sents):
            length = int(rng.integers(1, 13))
            gold.append(random_span_sets(rng, length, 3))
            pred.append(random_span_sets(rng, length, 3))
        yield gold, pred


def test_relaxed_matches_allpairs_oracle_exactly():
    for gold, pred in random_cases(200, seed=12):
        r = relaxed_prf(gold, pred)
        want = overlap_oracle(gold, pred)
        for t in ENTITY_TYPES:
            c = r.counts[t]
            assert (c.tp_pred, c.tp_gold, c.n_pred, c.n_gold) == want[t]


def test_relaxed_at_least_strict():
    for gold, pred in random_cases(200, seed=34):
        r = relaxed_prf(gold, pred)
        s = strict_prf(gold, pred)
        assert r.overall.precision >= s.overall.precision
        assert r.overall.recall >= s.overall.recall


def test_perfect_predictions_are_100_under_both():
    for gold, _ in random_cases(50, seed=56):
        for metric in (relaxed_prf, strict_prf):
            r = metric(gold, gold)
            if any(gold_sent for gold_sent in gold):
                assert r.overall.f1 == 100.0


def test_swapping_gold_and_pred_swaps_p_and_r():
    for gold, pred in random_cases(100, seed=78):
        for metric in (relaxed_prf, strict_prf):
            a = metric(gold, pred)
            b = metric(pred, gold)
            assert a.overall.precision == b.overall.recall
            assert a.overall.recall == b.overall.precision


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        relaxed_prf([[]], [[], []])
    with pytest.raises(LengthMismatch):
        strict_prf([[]], [[], []])


# ---------------------------------------------------------------------------
# formatting


def table_1b_report() -> EvalReport:
    values = {
        "LOC": (94.15, 93.53, 93.83),
        "MISC": (81.33, 81.89, 81.62),
        "ORG": (88.97, 92.29, 90.60),
        "PER": (96.67, 97.09, 96.88),
    }
    per_type = {t: Prf(*v) for t, v in values.items()}
    return EvalReport(
        overall=Prf(91.21, 92.05, 91.63),
        per_type=per_type,
        counts={t: SpanCounts() for t in ENTITY_TYPES},
    )


def test_format_report_layout():
    text = format_report(table_1b_report())
    lines = text.splitlines()
    assert lines[0].split() == ["Entity", "type", "Precision", "Recall", "F1-score"]
    assert lines[1].split() == ["LOC", "94.15", "93.53", "93.83"]
    assert lines[2].split() == ["MISC", "81.33", "81.89", "81.62"]
    assert lines[3].split() == ["ORG", "88.97", "92.29", "90.60"]
    assert lines[4].split() == ["PER", "96.67", "97.09", "96.88"]
    assert lines[5].split()[0] == "Overall"


def test_format_rounding_two_decimals():
    r = relaxed_prf([[span(0, 1, "PER"), span(5, 5, "ORG")]], [[span(0, 0, "PER")]])
    text = format_report(r)
    assert "66.67" in text  # 66.666... rounds half-up to 66.67


def test_empty_report_all_zeros():
    r = relaxed_prf([], [])
    text = format_report(r)
    for line in text.splitlines()[1:]:
        assert line.split()[-3:] == ["0.00", "0.00", "0.00"]


def test_report_record_exact_keys():
    rec = report_record(relaxed_prf([[span(0, 0, "LOC")]], [[span(0, 0, "LOC")]]))
    assert set(rec) == {"overall", "per_type", "counts"}
    assert set(rec["overall"]) == {"p", "r", "f1"}
    assert set(rec["per_type"]) == set(ENTITY_TYPES)
    for t in ENTITY_TYPES:
        assert set(rec["per_type"][t]) == {"p", "r", "f1"}
        assert set(rec["counts"][t]) == {"tp_pred", "tp_gold", "n_pred", "n_gold"}
    assert rec["overall"]["f1"] == 100.0


def test_f1_is_harmonic_mean_of_own_p_and_r():
    r = relaxed_prf(
        [[span(0, 0, "LOC"), span(2, 2, "LOC")], [span(0, 0, "PER")]],
        [[span(0, 0, "LOC")], [span(0, 0, "PER"), span(1, 1, "PER")]],
    )
    for prf in [r.overall, *r.per_type.values()]:
        p, rr = prf.precision, prf.recall
        want = 2 * p * rr / (p + rr) if p + rr else 0.0
        assert abs(prf.f1 - want) < 1e-12
