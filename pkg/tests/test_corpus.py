import pytest
from hypothesis import given, settings, strategies as st

from nerfusion.corpus import (
    Corpus,
    DepArc,
    EntitySpan,
    IOB1,
    IOB2,
    ROOT,
    Sentence,
    Token,
    attach_deps,
    corpus_stats,
    default_tagset,
    iob_to_spans,
    parse_conll,
    parse_conllu_deps,
    spans_to_iob,
)
from nerfusion.errors import (
    BadHeadIndex,
    CountMismatch,
    IndexOutOfRange,
    MalformedLine,
    OverlapError,
    UnknownTag,
)

TS1 = default_tagset(IOB1)
TS2 = default_tagset(IOB2)


# ---------------------------------------------------------------------------
# parse_conll


def test_parse_conll_column_layout():
    corp = parse_conll("U.S. NNP I-NP I-LOC\nrejects VBZ I-VP O\n", TS1)
    assert len(corp) == 1
    sent = corp.sentences[0]
    assert sent.tokens[0].surface == "U.S."
    assert sent.tokens[0].pos == "NNP"
    # IOB1 input is normalized to IOB2 at the parse boundary
    assert sent.tags() == ["B-LOC", "O"]
    assert iob_to_spans(sent.tags()) == [EntitySpan(0, 0, "LOC")]


def test_blank_line_separates_sentences():
    corp = parse_conll("a X Y O\n\nb X Y O\n", TS1)
    assert len(corp) == 2
    assert [s.sent_id for s in corp] == [0, 1]


def test_docstart_increments_doc_and_emits_no_tokens():
    text = "a X Y O\n\n-DOCSTART- -X- -X- O\n\nb X Y O\n"
    corp = parse_conll(text, TS1)
    assert len(corp) == 2
    assert [s.doc_id for s in corp] == [0, 1]
    assert all(t.surface != "-DOCSTART-" for s in corp for t in s.tokens)


def test_leading_docstart_opens_document_zero():
    corp = parse_conll("-DOCSTART- -X- -X- O\n\na X Y O\n", TS1)
    assert [s.doc_id for s in corp] == [0]


def test_malformed_line_carries_line_number():
    with pytest.raises(MalformedLine) as exc:
        parse_conll("good X Y O\nbad\n", TS1)
    assert exc.value.lineno == 2


def test_unknown_tag_rejected():
    with pytest.raises(UnknownTag):
        parse_conll("a X Y B-THING\n", TS1)


def test_crlf_tolerated():
    corp = parse_conll("a X Y O\r\nb X Y I-PER\r\n", TS1)
    assert corp.sentences[0].tags() == ["O", "B-PER"]


def test_parse_determinism():
    text = "a X Y I-ORG\nb X Y I-ORG\n\nc X Y O\n"
    assert parse_conll(text, TS1) == parse_conll(text, TS1)


# ---------------------------------------------------------------------------
# parse_conllu_deps


def conllu_line(i, head, rel="dep", form="w"):
    return f"{i}\t{form}\t_\t_\t_\t_\t{head}\t{rel}\t_\t_"


def test_conllu_index_shift_and_root():
    text = "\n".join([conllu_line(1, 2), conllu_line(2, 0, "root")]) + "\n"
    [arcs] = parse_conllu_deps(text)
    assert arcs == [DepArc(0, 1, "dep"), DepArc(1, ROOT, "root")]


def test_conllu_wrong_column_count():
    with pytest.raises(MalformedLine):
        parse_conllu_deps("1\tw\t_\t_\t_\t_\t0\t_\t_\n")  # 9 columns


def test_conllu_multiword_range_skipped():
    text = "\n".join(
        ["1-2\tofthe\t_\t_\t_\t_\t_\t_\t_\t_", conllu_line(1, 2), conllu_line(2, 0, "root")]
    )
    [arcs] = parse_conllu_deps(text)
    assert [a.dependent for a in arcs] == [0, 1]


def test_conllu_comments_skipped():
    text = "# sent_id = 0\n" + conllu_line(1, 0, "root")
    assert len(parse_conllu_deps(text)) == 1


def test_conllu_bad_head_index():
    with pytest.raises(BadHeadIndex):
        parse_conllu_deps(conllu_line(1, 5) + "\n")


def test_attach_deps_sentence_count_mismatch(tiny_corpus_nodeps):
    with pytest.raises(CountMismatch):
        attach_deps(tiny_corpus_nodeps, [])


def test_attach_deps_token_count_mismatch():
    corp = parse_conll("a X Y O\nb X Y O\n", TS1)
    with pytest.raises(CountMismatch):
        attach_deps(corp, [[DepArc(0, ROOT, "root")]])


def test_join_consistency_on_fixture(tiny_corpus):
    for sent in tiny_corpus:
        assert sent.arcs is not None
        assert len(sent.arcs) == len(sent)


# ---------------------------------------------------------------------------
# span codecs


def test_iob2_decode_basic():
    assert iob_to_spans(["O", "B-PER", "I-PER", "O"]) == [EntitySpan(1, 2, "PER")]


def test_iob1_decode_i_starts_spans():
    spans = iob_to_spans(["I-LOC", "I-LOC", "O", "I-ORG"], IOB1)
    assert spans == [EntitySpan(0, 1, "LOC"), EntitySpan(3, 3, "ORG")]


def test_adjacent_b_tags_make_two_spans():
    assert iob_to_spans(["B-LOC", "B-LOC"]) == [
        EntitySpan(0, 0, "LOC"),
        EntitySpan(1, 1, "LOC"),
    ]


def test_iob2_repair_records_positions():
    repairs = []
    spans = iob_to_spans(["O", "I-PER", "I-LOC"], IOB2, repairs=repairs)
    assert spans == [EntitySpan(1, 1, "PER"), EntitySpan(2, 2, "LOC")]
    assert repairs == [1, 2]


def test_spans_to_iob_basic():
    assert spans_to_iob([EntitySpan(1, 2, "PER")], 4) == ["O", "B-PER", "I-PER", "O"]
    assert spans_to_iob([], 3) == ["O", "O", "O"]


def test_spans_to_iob_adjacent_same_type():
    spans = [EntitySpan(0, 0, "LOC"), EntitySpan(1, 1, "LOC")]
    assert spans_to_iob(spans, 2, IOB2) == ["B-LOC", "B-LOC"]
    assert spans_to_iob(spans, 2, IOB1) == ["I-LOC", "B-LOC"]


def test_spans_to_iob_overlap_rejected():
    with pytest.raises(OverlapError):
        spans_to_iob([EntitySpan(0, 2, "LOC"), EntitySpan(2, 3, "PER")], 5)


def test_spans_to_iob_out_of_range():
    with pytest.raises(IndexOutOfRange):
        spans_to_iob([EntitySpan(0, 4, "LOC")], 3)


@st.composite
def span_sets(draw):
    length = draw(st.integers(min_value=1, max_value=14))
    spans = []
    pos = 0
    while pos < length and draw(st.booleans()):
        start = draw(st.integers(min_value=pos, max_value=length - 1))
        end = draw(st.integers(min_value=start, max_value=min(start + 3, length - 1)))
        etype = draw(st.sampled_from(["LOC", "MISC", "ORG", "PER"]))
        spans.append(EntitySpan(start, end, etype))
        pos = end + 1
    return length, spans


@given(span_sets())
@settings(max_examples=200)
def test_roundtrip_iob2(case):
    length, spans = case
    assert iob_to_spans(spans_to_iob(spans, length, IOB2), IOB2) == spans


@given(span_sets())
@settings(max_examples=200)
def test_roundtrip_iob1(case):
    length, spans = case
    assert iob_to_spans(spans_to_iob(spans, length, IOB1), IOB1) == spans


# ---------------------------------------------------------------------------
# stats


def test_stats_match_fixture_manifest(tiny_corpus, manifest):
    stats = corpus_stats(tiny_corpus)
    expect = manifest["fixture"]
    assert stats.n_documents == expect["n_documents"]
    assert stats.n_sentences == expect["n_sentences"]
    assert stats.n_tokens == expect["n_tokens"]
    assert stats.entity_counts == expect["entity_counts"]
    assert stats.n_entities == expect["n_entities"]
    assert stats.surface_mentions == expect["surface_mentions"]
    assert len(stats.dep_relations) > 0
    assert "NNP" in stats.pos_tags


def test_stats_empty_corpus():
    stats = corpus_stats(Corpus((), TS2))
    assert stats.n_tokens == 0
    assert stats.n_entities == 0
    assert stats.surface_mentions == {}


def test_tagset_rejects_bad_labels():
    with pytest.raises(ValueError):
        default_tagset("IOB3")
    with pytest.raises(ValueError):
        Token("", "O")
    with pytest.raises(ValueError):
        Sentence((), 0, 0)
