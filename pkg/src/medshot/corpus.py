"""Question-answer corpus handling: ingestion, truncation, splits, stats.

Two ingestion formats are supported: the MedQuAD-style XML layout
(``QAPair`` elements holding a ``Question`` with a ``qtype`` attribute
and an ``Answer`` body) and JSONL with one object per line.  All text is
whitespace-normalised on the way in: runs of Unicode whitespace collapse
to a single space and the ends are trimmed.
"""

from __future__ import annotations

import json
import math
import random
import xml.etree.ElementTree as ET
import xml.parsers.expat
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

HISTOGRAM_BUCKET_WIDTH = 50


class CorpusError(Exception):
    """Raised for ingestion contract violations (duplicate ids, bad shapes)."""


class ParseError(CorpusError):
    """Raised for malformed input files, naming the file and position."""


def normalize_ws(text: str) -> str:
    """Collapse runs of Unicode whitespace to single spaces and trim ends."""
    return " ".join(text.split())


def word_tokens(text: str) -> list[str]:
    """Whitespace word tokens, the unit used for truncation and stats."""
    return text.split()


@dataclass(frozen=True)
class QAPair:
    """One question/answer pair with its provenance and truncation state."""

    id: str
    question: str
    answer: str
    qtype: str | None = None
    source: str = ""
    truncated: bool = False


@dataclass
class Corpus:
    """An ordered collection of QA pairs under a shared answer word cap.

    Invariants: ids are non-empty and unique, questions and answers are
    non-empty after whitespace normalisation, and every answer holds at
    most ``word_cap`` whitespace tokens.  Treat instances as immutable;
    every operation returns a new corpus.
    """

    name: str
    pairs: list[QAPair] = field(default_factory=list)
    word_cap: int = 1

    def __post_init__(self) -> None:
        if self.word_cap < 1:
            raise CorpusError(f"word_cap must be positive, got {self.word_cap}")
        seen: set[str] = set()
        for pair in self.pairs:
            if not pair.id:
                raise CorpusError(f"corpus {self.name!r}: pair with empty id")
            if pair.id in seen:
                raise CorpusError(f"corpus {self.name!r}: duplicate id {pair.id!r}")
            seen.add(pair.id)
            if not pair.question or not pair.answer:
                raise CorpusError(
                    f"corpus {self.name!r}: pair {pair.id!r} has an empty question or answer"
                )
            if len(word_tokens(pair.answer)) > self.word_cap:
                raise CorpusError(
                    f"corpus {self.name!r}: pair {pair.id!r} exceeds word cap {self.word_cap}"
                )

    def __len__(self) -> int:
        return len(self.pairs)

    def by_id(self) -> dict[str, QAPair]:
        # corpora are immutable by convention, so the map is memoised
        cached = getattr(self, "_by_id_cache", None)
        if cached is None:
            cached = {pair.id: pair for pair in self.pairs}
            self._by_id_cache = cached
        return cached

    def ids(self) -> set[str]:
        return {pair.id for pair in self.pairs}


@dataclass(frozen=True)
class SplitSpec:
    """Deterministic train/test split parameters."""

    train_fraction: float
    seed: int

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise CorpusError(
                f"train_fraction must lie strictly between 0 and 1, got {self.train_fraction}"
            )
        if not 0 <= self.seed < 2**64:
            raise CorpusError(f"seed must be an unsigned 64-bit integer, got {self.seed}")


@dataclass(frozen=True)
class FinetuneRecord:
    id: str
    text: str


@dataclass(frozen=True)
class CorpusStats:
    count: int
    answer_word_histogram: dict[int, int]
    mean_answer_words: float
    mean_question_words: float
    qtype_counts: dict[str, int]

    def as_dict(self) -> dict:
        return {
            "count": self.count,
            "answer_word_histogram": {str(k): v for k, v in sorted(self.answer_word_histogram.items())},
            "mean_answer_words": self.mean_answer_words,
            "mean_question_words": self.mean_question_words,
            "qtype_counts": dict(sorted(self.qtype_counts.items())),
        }


def _initial_cap(pairs: Sequence[QAPair]) -> int:
    """Smallest valid word cap for freshly parsed pairs (max answer length)."""
    return max((len(word_tokens(p.answer)) for p in pairs), default=1)


def _byte_offset(data: bytes, line: int, column: int) -> int:
    """Byte offset of a 1-based (line, column) position in ``data``."""
    offset = 0
    for _ in range(line - 1):
        nl = data.find(b"\n", offset)
        if nl == -1:
            break
        offset = nl + 1
    return offset + column


def _xml_error_offset(data: bytes) -> int:
    """Byte offset at which expat rejects ``data`` (re-parse for precision)."""
    parser = xml.parsers.expat.ParserCreate()
    try:
        parser.Parse(data, True)
    except xml.parsers.expat.ExpatError:
        return int(parser.ErrorByteIndex)
    return 0


def parse_medquad(paths: Iterable[str | Path], source: str = "medquad") -> tuple[Corpus, int]:
    """Parse MedQuAD-style XML documents into a corpus.

    Pairs whose answer (or question) is empty after normalisation are
    skipped and counted in the returned tally.  Malformed XML raises
    :class:`ParseError` naming the file and byte offset; duplicate ids
    raise :class:`CorpusError`.
    """
    pairs: list[QAPair] = []
    seen: set[str] = set()
    skipped = 0
    counter = 0
    for path in paths:
        path = Path(path)
        data = path.read_bytes()
        try:
            root = ET.fromstring(data)
        except ET.ParseError as exc:
            offset = _xml_error_offset(data)
            raise ParseError(f"malformed XML in {path} at byte offset {offset}: {exc}") from exc
        for qa in root.iter("QAPair"):
            counter += 1
            q_el = qa.find("Question")
            a_el = qa.find("Answer")
            question = normalize_ws(q_el.text or "") if q_el is not None else ""
            answer = normalize_ws(a_el.text or "") if a_el is not None else ""
            if not question or not answer:
                skipped += 1
                continue
            pair_id = (q_el.get("qid") or "").strip() or f"{source}-{counter}"
            if pair_id in seen:
                raise CorpusError(f"duplicate id {pair_id!r} while parsing {path}")
            seen.add(pair_id)
            qtype = (q_el.get("qtype") or "").strip() or None
            pairs.append(
                QAPair(id=pair_id, question=question, answer=answer, qtype=qtype, source=source)
            )
    return Corpus(name=source, pairs=pairs, word_cap=_initial_cap(pairs)), skipped


def parse_jsonl(path: str | Path, source: str) -> tuple[Corpus, int]:
    """Parse a JSONL corpus file: one object per line.

    Recognised keys: ``question``, ``answer``, optional ``id``,
    ``qtype``, ``source`` and ``truncated`` (the latter two let corpora
    saved by :func:`save_jsonl` round-trip); unmapped keys are ignored.
    Lines missing an id get ``{source}-{line number}`` (1-based).  Lines
    that are not JSON objects raise :class:`ParseError` with the line
    number; lines missing question or answer are skipped and tallied.
    """
    path = Path(path)
    pairs: list[QAPair] = []
    seen: set[str] = set()
    skipped = 0
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path} line {lineno}: not valid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise ParseError(f"{path} line {lineno}: expected a JSON object")
            question = normalize_ws(str(obj.get("question") or ""))
            answer = normalize_ws(str(obj.get("answer") or ""))
            if not question or not answer:
                skipped += 1
                continue
            pair_id = str(obj.get("id") or "") or f"{source}-{lineno}"
            if pair_id in seen:
                raise CorpusError(f"duplicate id {pair_id!r} in {path}")
            seen.add(pair_id)
            qtype = obj.get("qtype")
            qtype = normalize_ws(str(qtype)) if qtype else None
            pairs.append(
                QAPair(
                    id=pair_id,
                    question=question,
                    answer=answer,
                    qtype=qtype or None,
                    source=str(obj.get("source") or source),
                    truncated=bool(obj.get("truncated", False)),
                )
            )
    return Corpus(name=source, pairs=pairs, word_cap=_initial_cap(pairs)), skipped


def save_jsonl(corpus: Corpus, path: str | Path) -> Path:
    """Write a corpus as JSONL readable back via :func:`parse_jsonl`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for pair in corpus.pairs:
            record = {
                "id": pair.id,
                "question": pair.question,
                "answer": pair.answer,
                "qtype": pair.qtype,
                "source": pair.source,
                "truncated": pair.truncated,
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    return path


def truncate_answers(corpus: Corpus, cap: int) -> Corpus:
    """Cap every answer at its first ``cap`` whitespace tokens.

    Pairs that lose tokens get ``truncated=True``; pairs already flagged
    stay flagged, which makes the operation idempotent at a fixed cap.
    """
    if cap < 1:
        raise CorpusError(f"word cap must be positive, got {cap}")
    new_pairs = []
    for pair in corpus.pairs:
        toks = word_tokens(pair.answer)
        if len(toks) > cap:
            new_pairs.append(
                replace(pair, answer=" ".join(toks[:cap]), truncated=True)
            )
        else:
            new_pairs.append(pair)
    return Corpus(name=corpus.name, pairs=new_pairs, word_cap=cap)


def split(corpus: Corpus, spec: SplitSpec) -> tuple[Corpus, Corpus]:
    """Deterministic seeded train/test split.

    Protocol: sort pairs by id, apply a Fisher–Yates shuffle seeded with
    ``spec.seed``, and send the first ``ceil(train_fraction * N)`` pairs
    to train, the rest to test.  The same corpus, fraction and seed
    always produce identical splits.
    """
    n = len(corpus.pairs)
    if n < 2:
        raise CorpusError(f"cannot split corpus {corpus.name!r} with {n} pair(s)")
    shuffled = sorted(corpus.pairs, key=lambda p: p.id)
    random.Random(spec.seed).shuffle(shuffled)
    n_train = math.ceil(spec.train_fraction * n)
    train = Corpus(name=f"{corpus.name}-train", pairs=shuffled[:n_train], word_cap=corpus.word_cap)
    test = Corpus(name=f"{corpus.name}-test", pairs=shuffled[n_train:], word_cap=corpus.word_cap)
    return train, test


def merge(corpora: Sequence[Corpus]) -> Corpus:
    """Concatenate corpora, preserving each corpus's internal order.

    Ids shared between corpora are disambiguated by prefixing the
    colliding pairs with their source (``{source}:{id}``); if a
    collision survives prefixing the merge fails listing the ids.  The
    merged word cap is the maximum of the inputs.
    """
    if not corpora:
        raise CorpusError("merge requires at least one corpus")
    if len(corpora) == 1:
        return corpora[0]
    id_owners: dict[str, int] = {}
    for corpus in corpora:
        for pair in corpus.pairs:
            id_owners[pair.id] = id_owners.get(pair.id, 0) + 1
    colliding = {pid for pid, count in id_owners.items() if count > 1}
    merged_pairs: list[QAPair] = []
    seen: set[str] = set()
    unresolved: set[str] = set()
    for corpus in corpora:
        for pair in corpus.pairs:
            if pair.id in colliding:
                pair = replace(pair, id=f"{pair.source}:{pair.id}")
            if pair.id in seen:
                unresolved.add(pair.id)
            seen.add(pair.id)
            merged_pairs.append(pair)
    if unresolved:
        listing = ", ".join(sorted(unresolved))
        raise CorpusError(f"merge id collision not resolvable by source prefixing: {listing}")
    name = "+".join(c.name for c in corpora)
    word_cap = max(c.word_cap for c in corpora)
    return Corpus(name=name, pairs=merged_pairs, word_cap=word_cap)


def stats(corpus: Corpus) -> CorpusStats:
    """Descriptive statistics: counts, answer-length histogram, qtype tally."""
    histogram: dict[int, int] = {}
    answer_total = 0
    question_total = 0
    qtype_counts: dict[str, int] = {}
    for pair in corpus.pairs:
        n_answer = len(word_tokens(pair.answer))
        n_question = len(word_tokens(pair.question))
        answer_total += n_answer
        question_total += n_question
        bucket = (n_answer // HISTOGRAM_BUCKET_WIDTH) * HISTOGRAM_BUCKET_WIDTH
        histogram[bucket] = histogram.get(bucket, 0) + 1
        if pair.qtype is not None:
            qtype_counts[pair.qtype] = qtype_counts.get(pair.qtype, 0) + 1
    count = len(corpus.pairs)
    return CorpusStats(
        count=count,
        answer_word_histogram=histogram,
        mean_answer_words=answer_total / count if count else 0.0,
        mean_question_words=question_total / count if count else 0.0,
        qtype_counts=qtype_counts,
    )


def build_finetune_records(corpus: Corpus) -> list[FinetuneRecord]:
    """Render pairs into single-text fine-tuning records."""
    return [
        FinetuneRecord(id=p.id, text=f"Question: {p.question}\nAnswer: {p.answer}")
        for p in corpus.pairs
    ]


def save_finetune_jsonl(records: Sequence[FinetuneRecord], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps({"id": rec.id, "text": rec.text}, ensure_ascii=False) + "\n")
    return path
