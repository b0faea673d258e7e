"""Self-contained text generation metrics: corpus-level BLEU and ROUGE.

All scores are computed in the unit interval; presentation scaling
(percent) happens only when tables are rendered.  Tokenisation is shared
by every consumer through :func:`tokenize_eval` so that candidate and
reference texts are always compared under identical preprocessing.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from medshot import kernels

#: Floor applied to zero n-gram precisions before taking logs, so that a
#: single empty order does not collapse the geometric mean to a domain error.
PRECISION_FLOOR = 1e-9

SCALES = ("unit", "percent")


def tokenize_eval(text: str) -> list[str]:
    """Normative evaluation tokenizer.

    Lowercase the text, replace every non-alphanumeric character with a
    space, and split on whitespace.  ``"COVID-19"`` becomes
    ``["covid", "19"]``; an empty string yields an empty list.
    """
    return "".join(ch if ch.isalnum() else " " for ch in text.lower()).split()


def ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    """Multiset of n-grams of ``tokens`` as a Counter keyed by tuple."""
    if n < 1:
        raise ValueError(f"n-gram order must be >= 1, got {n}")
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu_corpus(pairs: Sequence[tuple[Sequence[str], Sequence[str]]], max_n: int) -> float:
    """Corpus-level BLEU over (candidate tokens, reference tokens) pairs.

    Clipped n-gram matches and candidate n-gram totals are pooled across
    the whole corpus for each order 1..max_n; the score is the brevity
    penalty times the geometric mean of the pooled precisions, with zero
    precisions floored at ``PRECISION_FLOOR``.  The brevity penalty is
    ``min(1, exp(1 - R/C))`` for total reference length R and total
    candidate length C.
    """
    if not pairs:
        raise ValueError("bleu_corpus requires at least one candidate/reference pair")
    if max_n < 1:
        raise ValueError(f"max_n must be >= 1, got {max_n}")
    total_cand = sum(len(c) for c, _ in pairs)
    total_ref = sum(len(r) for _, r in pairs)
    if total_cand == 0:
        return 0.0
    product = 1.0
    for n in range(1, max_n + 1):
        matches = 0
        candidates = 0
        for cand, ref in pairs:
            cand_counts = ngram_counts(cand, n)
            if not cand_counts:
                continue
            ref_counts = ngram_counts(ref, n)
            candidates += sum(cand_counts.values())
            matches += sum(min(c, ref_counts[g]) for g, c in cand_counts.items())
        precision = matches / candidates if candidates else 0.0
        product *= max(precision, PRECISION_FLOOR)
    brevity = min(1.0, math.exp(1.0 - total_ref / total_cand))
    # the product form of the geometric mean keeps a lone floored
    # precision at exactly PRECISION_FLOOR (exp(log x) can round up)
    return brevity * product ** (1.0 / max_n)


class RougeScore(NamedTuple):
    precision: float
    recall: float
    f1: float


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int) -> RougeScore:
    """ROUGE-N precision/recall/F1 from clipped n-gram overlap."""
    cand_counts = ngram_counts(candidate, n)
    ref_counts = ngram_counts(reference, n)
    overlap = sum(min(c, ref_counts[g]) for g, c in cand_counts.items())
    n_cand = sum(cand_counts.values())
    n_ref = sum(ref_counts.values())
    precision = overlap / n_cand if n_cand else 0.0
    recall = overlap / n_ref if n_ref else 0.0
    return RougeScore(precision, recall, _f1(precision, recall))


def lcs_length(candidate: Sequence[str], reference: Sequence[str]) -> int:
    """Longest-common-subsequence length between two token sequences."""
    if not candidate or not reference:
        return 0
    vocab: dict[str, int] = {}
    for tok in candidate:
        vocab.setdefault(tok, len(vocab))
    for tok in reference:
        vocab.setdefault(tok, len(vocab))
    a = np.fromiter((vocab[t] for t in candidate), dtype=np.int64, count=len(candidate))
    b = np.fromiter((vocab[t] for t in reference), dtype=np.int64, count=len(reference))
    return kernels.lcs_len(a, b)


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> RougeScore:
    """ROUGE-L precision/recall/F1 from the LCS length (beta = 1)."""
    if not candidate or not reference:
        return RougeScore(0.0, 0.0, 0.0)
    lcs = lcs_length(candidate, reference)
    precision = lcs / len(candidate)
    recall = lcs / len(reference)
    return RougeScore(precision, recall, _f1(precision, recall))


@dataclass(frozen=True)
class MetricReport:
    """Aggregate scores for one evaluated run (always unit scale internally)."""

    bleu1: float
    bleu4: float
    rouge1_f: float
    rougeL_f: float
    n_pairs: int
    scale: str = "unit"

    def as_dict(self) -> dict:
        return {
            "bleu1": self.bleu1,
            "bleu4": self.bleu4,
            "rouge1_f": self.rouge1_f,
            "rougeL_f": self.rougeL_f,
            "n_pairs": self.n_pairs,
            "scale": self.scale,
        }


def score_pair(candidate_text: str, reference_text: str) -> dict[str, float]:
    """Per-pair ROUGE F1 scores used in audit records."""
    cand = tokenize_eval(candidate_text)
    ref = tokenize_eval(reference_text)
    return {
        "rouge1_f": rouge_n(cand, ref, 1).f1,
        "rougeL_f": rouge_l(cand, ref).f1,
    }


def score_run(outputs: Iterable[tuple[str, str]], scale: str = "unit") -> MetricReport:
    """Score a run of (generated text, reference text) pairs.

    BLEU-1/BLEU-4 are corpus-level (pooled counts); ROUGE-1 and ROUGE-L
    are arithmetic means of per-pair F1.  ``scale`` is carried for
    presentation only — the stored values are always unit interval.
    """
    if scale not in SCALES:
        raise ValueError(f"unknown scale {scale!r}; expected one of {SCALES}")
    token_pairs = [(tokenize_eval(c), tokenize_eval(r)) for c, r in outputs]
    if not token_pairs:
        raise ValueError("score_run requires at least one generated/reference pair")
    rouge1 = [rouge_n(c, r, 1).f1 for c, r in token_pairs]
    rougel = [rouge_l(c, r).f1 for c, r in token_pairs]
    return MetricReport(
        bleu1=bleu_corpus(token_pairs, 1),
        bleu4=bleu_corpus(token_pairs, 4),
        rouge1_f=sum(rouge1) / len(rouge1),
        rougeL_f=sum(rougel) / len(rougel),
        n_pairs=len(token_pairs),
        scale=scale,
    )
