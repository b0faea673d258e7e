"""Few-shot prompt assembly: example selection strategies and rendering.

Three selection strategies produce the in-context examples: ``static``
(a fixed seeded draw shared by every test question of a run),
``vanilla_dynamic`` (nearest neighbours over all training questions) and
``typewise_dynamic`` (nearest neighbours restricted to the block of the
predicted question type).  ``none`` renders a zero-shot prompt.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Collection, Sequence

import numpy as np

from medshot.classify import CentroidModel, TypePrediction, predict_type
from medshot.corpus import Corpus
from medshot.search import ALL_LABEL, TypePartitionedIndex, query_topk

KIND_NONE = "none"
KIND_STATIC = "static"
KIND_VANILLA = "vanilla_dynamic"
KIND_TYPEWISE = "typewise_dynamic"
STRATEGY_KINDS = (KIND_NONE, KIND_STATIC, KIND_VANILLA, KIND_TYPEWISE)

ORDER_ASCENDING = "ascending_similarity"
ORDER_DESCENDING = "descending_similarity"
ORDERS = (ORDER_ASCENDING, ORDER_DESCENDING)

PROMPT_HEADER = (
    "You are a medical question answering assistant. "
    "Answer the final question in the same style as the examples.\n\n"
)


@dataclass(frozen=True)
class PromptStrategy:
    """How in-context examples are chosen and ordered for one run."""

    kind: str
    k: int = 2
    seed: int | None = None
    order: str = ORDER_ASCENDING

    def __post_init__(self) -> None:
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}; expected one of {STRATEGY_KINDS}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.order not in ORDERS:
            raise ValueError(f"unknown order {self.order!r}; expected one of {ORDERS}")
        if self.kind == KIND_STATIC and self.seed is None:
            raise ValueError("static strategies require a seed")
        if self.kind != KIND_STATIC and self.seed is not None:
            raise ValueError(f"{self.kind} strategies must not carry a seed")


@dataclass(frozen=True)
class PromptExample:
    """One in-context example; ``score`` is set only for dynamic selection."""

    id: str
    question: str
    answer: str
    score: float | None = None


@dataclass(frozen=True)
class AssembledPrompt:
    """A rendered prompt plus the examples in their rendered order."""

    examples: tuple[PromptExample, ...]
    test_question: str
    rendered: str


@dataclass(frozen=True)
class TypewiseSelection:
    """Typewise selection result: examples, the routing prediction, and
    whether retrieval fell back to the all-vectors block because the
    predicted label has no block."""

    examples: list[PromptExample]
    prediction: TypePrediction
    used_fallback: bool


def select_static(train: Corpus, strategy: PromptStrategy) -> list[PromptExample]:
    """Draw ``k`` fixed examples from the id-sorted train corpus.

    The draw depends only on the corpus ids and the strategy seed, so
    every test question of a run sees the same examples.
    """
    if strategy.kind != KIND_STATIC:
        raise ValueError(f"select_static called with a {strategy.kind!r} strategy")
    ordered = sorted(train.pairs, key=lambda p: p.id)
    if len(ordered) < strategy.k:
        raise ValueError(
            f"train corpus has {len(ordered)} pairs, cannot draw k={strategy.k} static examples"
        )
    chosen = random.Random(strategy.seed).sample(ordered, strategy.k)
    return [PromptExample(id=p.id, question=p.question, answer=p.answer) for p in chosen]


def _neighbors_to_examples(neighbors, train: Corpus) -> list[PromptExample]:
    pair_by_id = train.by_id()
    examples = []
    for nb in neighbors:
        pair = pair_by_id.get(nb.id)
        if pair is None:
            raise ValueError(f"retrieved id {nb.id!r} is not present in train corpus {train.name!r}")
        examples.append(
            PromptExample(id=pair.id, question=pair.question, answer=pair.answer, score=nb.score)
        )
    return examples


def select_vanilla(
    index: TypePartitionedIndex,
    train: Corpus,
    query_vec: np.ndarray,
    strategy: PromptStrategy,
    exclude_ids: Collection[str] = (),
) -> list[PromptExample]:
    """Top-k nearest training questions, unpartitioned, scores attached."""
    if strategy.kind != KIND_VANILLA:
        raise ValueError(f"select_vanilla called with a {strategy.kind!r} strategy")
    neighbors = query_topk(index, query_vec, strategy.k, None, exclude_ids)
    return _neighbors_to_examples(neighbors, train)


def select_typewise(
    index: TypePartitionedIndex,
    model: CentroidModel,
    train: Corpus,
    query_vec: np.ndarray,
    strategy: PromptStrategy,
    exclude_ids: Collection[str] = (),
) -> TypewiseSelection:
    """Route by predicted question type, then retrieve within that block.

    When the predicted label has no block in the index, retrieval falls
    back to the all-vectors block and the result is flagged.
    """
    if strategy.kind != KIND_TYPEWISE:
        raise ValueError(f"select_typewise called with a {strategy.kind!r} strategy")
    prediction = predict_type(model, query_vec)
    used_fallback = prediction.label not in index.blocks
    type_filter = ALL_LABEL if used_fallback else prediction.label
    neighbors = query_topk(index, query_vec, strategy.k, type_filter, exclude_ids)
    return TypewiseSelection(
        examples=_neighbors_to_examples(neighbors, train),
        prediction=prediction,
        used_fallback=used_fallback,
    )


def render(
    examples: Sequence[PromptExample],
    test_question: str,
    order: str = ORDER_ASCENDING,
) -> AssembledPrompt:
    """Render examples and the test question into the prompt template.

    Scored (dynamic) examples are sorted by similarity: ascending order
    places the most similar example immediately before the test
    question.  Unscored (static) examples keep their selection order.
    The rendered text always ends with ``"Question: {test}\\nAnswer:"``.
    """
    if order not in ORDERS:
        raise ValueError(f"unknown order {order!r}; expected one of {ORDERS}")
    ordered = list(examples)
    if ordered and all(e.score is not None for e in ordered):
        ordered.sort(key=lambda e: e.score, reverse=(order == ORDER_DESCENDING))
    parts = [PROMPT_HEADER]
    for ex in ordered:
        parts.append(f"Question: {ex.question}\nAnswer: {ex.answer}\n\n")
    parts.append(f"Question: {test_question}\nAnswer:")
    return AssembledPrompt(
        examples=tuple(ordered), test_question=test_question, rendered="".join(parts)
    )


def prompt_to_dict(prompt: AssembledPrompt, predicted_type: str | None = None) -> dict:
    """JSON-serialisable audit record for an assembled prompt."""
    record = {
        "examples": [
            {"id": e.id, "question": e.question, "answer": e.answer, "score": e.score}
            for e in prompt.examples
        ],
        "test_question": prompt.test_question,
        "rendered": prompt.rendered,
    }
    if predicted_type is not None:
        record["predicted_type"] = predicted_type
    return record
