"""Corpus ingestion, truncation, split, merge and stats behaviour."""

from __future__ import annotations

import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from medshot import corpus as corpus_mod
from medshot.corpus import (
    Corpus,
    CorpusError,
    ParseError,
    QAPair,
    SplitSpec,
    build_finetune_records,
    merge,
    parse_jsonl,
    parse_medquad,
    split,
    stats,
    truncate_answers,
)

MEDQUAD_XML = """<Document id="0000001" source="NIDDK">
  <Focus>Glaucoma</Focus>
  <QAPairs>
    <QAPair pid="1">
      <Question qid="0000001-1" qtype="information">What is glaucoma?</Question>
      <Answer>Glaucoma is a group of diseases that damage the optic nerve.</Answer>
    </QAPair>
    <QAPair pid="2">
      <Question qid="0000001-2" qtype="treatment">What are the   treatments for glaucoma?</Question>
      <Answer>Treatments include eye drops, laser trabeculoplasty, and surgery.</Answer>
    </QAPair>
  </QAPairs>
</Document>
"""


def _mk_corpus(n: int, name: str = "c", source: str = "src") -> Corpus:
    pairs = [
        QAPair(
            id=f"{name}-{i:03d}",
            question=f"question number {i} about topic {i % 5}",
            answer=f"answer number {i} with several words inside",
            qtype=f"type{i % 3}",
            source=source,
        )
        for i in range(n)
    ]
    return Corpus(name=name, pairs=pairs, word_cap=32)


# ── MedQuAD XML ingestion ───────────────────────────────────────────────────


def test_parse_medquad_reads_pairs_types_and_ids(tmp_path):
    path = tmp_path / "doc1.xml"
    path.write_text(MEDQUAD_XML)
    corpus, skipped = parse_medquad([path])
    assert skipped == 0
    assert [p.id for p in corpus.pairs] == ["0000001-1", "0000001-2"]
    assert corpus.pairs[0].qtype == "information"
    assert corpus.pairs[1].qtype == "treatment"
    assert corpus.pairs[0].source == "medquad"
    # interior whitespace runs collapse
    assert corpus.pairs[1].question == "What are the treatments for glaucoma?"


def test_parse_medquad_skips_empty_answers_with_tally(tmp_path):
    xml = """<Document><QAPairs>
      <QAPair><Question qid="q-1" qtype="information">A question here?</Question>
      <Answer>   </Answer></QAPair>
    </QAPairs></Document>"""
    path = tmp_path / "doc.xml"
    path.write_text(xml)
    corpus, skipped = parse_medquad([path])
    assert len(corpus) == 0
    assert skipped == 1


def test_parse_medquad_malformed_xml_names_file_and_offset(tmp_path):
    path = tmp_path / "broken.xml"
    path.write_text("<Document><QAPairs><QAPair></Document>")
    with pytest.raises(ParseError) as err:
        parse_medquad([path])
    message = str(err.value)
    assert "broken.xml" in message
    assert "byte offset" in message


def test_parse_medquad_duplicate_id_rejected(tmp_path):
    xml = """<Document><QAPairs>
      <QAPair><Question qid="dup-1" qtype="t">First question?</Question>
      <Answer>First answer text.</Answer></QAPair>
      <QAPair><Question qid="dup-1" qtype="t">Second question?</Question>
      <Answer>Second answer text.</Answer></QAPair>
    </QAPairs></Document>"""
    path = tmp_path / "doc.xml"
    path.write_text(xml)
    with pytest.raises(CorpusError, match="dup-1"):
        parse_medquad([path])


def test_parse_medquad_multiple_documents(tmp_path):
    p1 = tmp_path / "a.xml"
    p2 = tmp_path / "b.xml"
    p1.write_text(MEDQUAD_XML)
    p2.write_text(MEDQUAD_XML.replace("0000001", "0000002"))
    corpus, _ = parse_medquad([p1, p2])
    assert len(corpus) == 4


# ── JSONL ingestion ─────────────────────────────────────────────────────────


def test_parse_jsonl_assigns_line_number_ids(tmp_path):
    path = tmp_path / "qa.jsonl"
    rows = [
        {"question": "What causes fever?", "answer": "Many infections cause fever."},
        {"question": "What is aspirin for?", "answer": "Pain relief and inflammation."},
    ]
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    corpus, skipped = parse_jsonl(path, source="icliniq")
    assert skipped == 0
    assert [p.id for p in corpus.pairs] == ["icliniq-1", "icliniq-2"]
    assert all(p.source == "icliniq" for p in corpus.pairs)


def test_parse_jsonl_bad_line_reports_line_number(tmp_path):
    path = tmp_path / "qa.jsonl"
    path.write_text('{"question": "q?", "answer": "a"}\nnot json at all\n')
    with pytest.raises(ParseError, match="line 2"):
        parse_jsonl(path, source="s")


def test_parse_jsonl_missing_fields_skipped_with_tally(tmp_path):
    path = tmp_path / "qa.jsonl"
    rows = [
        {"question": "Only a question?"},
        {"answer": "Only an answer."},
        {"question": "Real question?", "answer": "Real answer."},
    ]
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    corpus, skipped = parse_jsonl(path, source="s")
    assert len(corpus) == 1
    assert skipped == 2


def test_parse_jsonl_duplicate_explicit_ids_rejected(tmp_path):
    path = tmp_path / "qa.jsonl"
    rows = [
        {"id": "x", "question": "q one?", "answer": "a one"},
        {"id": "x", "question": "q two?", "answer": "a two"},
    ]
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    with pytest.raises(CorpusError, match="'x'"):
        parse_jsonl(path, source="s")


def test_jsonl_round_trip_preserves_fields(tmp_path):
    corpus = _mk_corpus(5)
    path = tmp_path / "saved.jsonl"
    corpus_mod.save_jsonl(corpus, path)
    loaded, skipped = parse_jsonl(path, source="other")
    assert skipped == 0
    assert [(p.id, p.question, p.answer, p.qtype, p.source) for p in loaded.pairs] == [
        (p.id, p.question, p.answer, p.qtype, p.source) for p in corpus.pairs
    ]


# ── truncation ──────────────────────────────────────────────────────────────


def test_truncate_caps_answers_and_flags():
    long_answer = " ".join(f"w{i}" for i in range(40))
    corpus = Corpus(
        name="t",
        pairs=[
            QAPair(id="a", question="q?", answer=long_answer),
            QAPair(id="b", question="q?", answer="short answer text"),
        ],
        word_cap=40,
    )
    capped = truncate_answers(corpus, 10)
    assert capped.word_cap == 10
    assert capped.pairs[0].answer == " ".join(f"w{i}" for i in range(10))
    assert capped.pairs[0].truncated is True
    assert capped.pairs[1].answer == "short answer text"
    assert capped.pairs[1].truncated is False


def test_truncate_is_idempotent_and_keeps_flags():
    long_answer = " ".join(f"w{i}" for i in range(40))
    corpus = Corpus(
        name="t", pairs=[QAPair(id="a", question="q?", answer=long_answer)], word_cap=40
    )
    once = truncate_answers(corpus, 10)
    twice = truncate_answers(once, 10)
    assert once == twice
    # widening the cap later must not clear the flag
    wider = truncate_answers(once, 20)
    assert wider.pairs[0].truncated is True


def test_truncate_rejects_nonpositive_cap():
    with pytest.raises(CorpusError):
        truncate_answers(_mk_corpus(2), 0)


# ── split ───────────────────────────────────────────────────────────────────


def test_split_is_a_partition_with_ceil_sizes():
    corpus = _mk_corpus(10)
    train, test = split(corpus, SplitSpec(train_fraction=0.9, seed=42))
    assert len(train) == 9 and len(test) == 1
    assert train.ids() | test.ids() == corpus.ids()
    assert train.ids() & test.ids() == set()


def test_split_deterministic_for_same_seed():
    corpus = _mk_corpus(20)
    spec = SplitSpec(train_fraction=0.7, seed=123)
    t1, e1 = split(corpus, spec)
    t2, e2 = split(corpus, spec)
    assert [p.id for p in t1.pairs] == [p.id for p in t2.pairs]
    assert [p.id for p in e1.pairs] == [p.id for p in e2.pairs]
    t3, _ = split(corpus, SplitSpec(train_fraction=0.7, seed=124))
    assert [p.id for p in t3.pairs] != [p.id for p in t1.pairs]


def test_split_rejects_tiny_corpora_and_bad_fractions():
    with pytest.raises(CorpusError):
        split(_mk_corpus(1), SplitSpec(train_fraction=0.5, seed=0))
    with pytest.raises(CorpusError):
        SplitSpec(train_fraction=0.0, seed=0)
    with pytest.raises(CorpusError):
        SplitSpec(train_fraction=1.0, seed=0)
    with pytest.raises(CorpusError):
        SplitSpec(train_fraction=0.5, seed=-1)


@settings(max_examples=100, deadline=None)
@given(
    n=st.integers(2, 50),
    fraction=st.floats(0.01, 0.99),
    seed=st.integers(0, 2**64 - 1),
)
def test_split_partition_property(n, fraction, seed):
    corpus = _mk_corpus(n)
    spec = SplitSpec(train_fraction=fraction, seed=seed)
    train, test = split(corpus, spec)
    assert len(train) == math.ceil(fraction * n)
    assert len(train) + len(test) == n
    assert train.ids() | test.ids() == corpus.ids()
    assert train.ids() & test.ids() == set()
    again_train, again_test = split(corpus, spec)
    assert [p.id for p in again_train.pairs] == [p.id for p in train.pairs]
    assert [p.id for p in again_test.pairs] == [p.id for p in test.pairs]


# ── merge ───────────────────────────────────────────────────────────────────


def test_merge_single_corpus_is_identity():
    corpus = _mk_corpus(4)
    assert merge([corpus]) == corpus


def test_merge_disjoint_concatenates_in_order():
    a = _mk_corpus(3, name="a", source="sa")
    b = _mk_corpus(2, name="b", source="sb")
    merged = merge([a, b])
    assert len(merged) == 5
    assert [p.id for p in merged.pairs] == [p.id for p in a.pairs] + [p.id for p in b.pairs]
    assert merged.word_cap == max(a.word_cap, b.word_cap)


def test_merge_resolves_cross_source_collisions_by_prefixing():
    a = Corpus(
        name="a",
        pairs=[QAPair(id="x", question="q a?", answer="answer a", source="sa")],
        word_cap=8,
    )
    b = Corpus(
        name="b",
        pairs=[QAPair(id="x", question="q b?", answer="answer b", source="sb")],
        word_cap=8,
    )
    merged = merge([a, b])
    assert [p.id for p in merged.pairs] == ["sa:x", "sb:x"]


def test_merge_same_source_collision_is_an_error_listing_ids():
    a = Corpus(
        name="a",
        pairs=[QAPair(id="x", question="q a?", answer="answer a", source="s")],
        word_cap=8,
    )
    b = Corpus(
        name="b",
        pairs=[QAPair(id="x", question="q b?", answer="answer b", source="s")],
        word_cap=8,
    )
    with pytest.raises(CorpusError, match="s:x"):
        merge([a, b])


@settings(max_examples=100, deadline=None)
@given(na=st.integers(0, 20), nb=st.integers(0, 20), overlap=st.integers(0, 10))
def test_merge_cardinality_property(na, nb, overlap):
    overlap = min(overlap, na, nb)
    a_pairs = [
        QAPair(id=f"i{i}", question=f"qa {i}?", answer=f"aa {i}", source="sa")
        for i in range(na)
    ]
    # corpus b reuses `overlap` ids from a, under a different source
    b_pairs = [
        QAPair(
            id=f"i{i}" if i < overlap else f"j{i}",
            question=f"qb {i}?",
            answer=f"ab {i}",
            source="sb",
        )
        for i in range(nb)
    ]
    if not a_pairs or not b_pairs:
        return
    merged = merge(
        [Corpus(name="a", pairs=a_pairs, word_cap=4), Corpus(name="b", pairs=b_pairs, word_cap=4)]
    )
    assert len(merged) == na + nb
    assert len(merged.ids()) == na + nb


# ── stats and finetune records ──────────────────────────────────────────────


def test_stats_histogram_buckets_and_means():
    def answer_of(n):
        return " ".join(f"w{i}" for i in range(n))

    corpus = Corpus(
        name="s",
        pairs=[
            QAPair(id="a", question="one two three", answer=answer_of(10), qtype="ta"),
            QAPair(id="b", question="one two", answer=answer_of(60), qtype="tb"),
            QAPair(id="c", question="one", answer=answer_of(10), qtype="ta"),
        ],
        word_cap=60,
    )
    report = stats(corpus)
    assert report.count == 3
    assert report.answer_word_histogram == {0: 2, 50: 1}
    assert report.mean_answer_words == pytest.approx(80 / 3)
    assert report.mean_question_words == pytest.approx(2.0)
    assert report.qtype_counts == {"ta": 2, "tb": 1}
    assert sum(report.answer_word_histogram.values()) == report.count


def test_stats_empty_corpus():
    report = stats(Corpus(name="e", pairs=[], word_cap=1))
    assert report.count == 0
    assert report.answer_word_histogram == {}
    assert report.mean_answer_words == 0.0


def test_finetune_record_template():
    corpus = Corpus(
        name="f",
        pairs=[QAPair(id="p1", question="What is X?", answer="X is a thing.")],
        word_cap=8,
    )
    records = build_finetune_records(corpus)
    assert len(records) == 1
    assert records[0].id == "p1"
    assert records[0].text == "Question: What is X?\nAnswer: X is a thing."


# ── corpus invariants ───────────────────────────────────────────────────────


def test_corpus_rejects_duplicate_ids():
    pairs = [
        QAPair(id="d", question="q?", answer="a"),
        QAPair(id="d", question="q2?", answer="a2"),
    ]
    with pytest.raises(CorpusError, match="duplicate"):
        Corpus(name="bad", pairs=pairs, word_cap=4)


def test_corpus_rejects_answers_beyond_cap():
    pairs = [QAPair(id="a", question="q?", answer="one two three four five")]
    with pytest.raises(CorpusError, match="cap"):
        Corpus(name="bad", pairs=pairs, word_cap=2)
