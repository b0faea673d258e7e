"""Question-type classification for routing retrieval to typed blocks.

The built-in classifier is nearest-centroid in embedding space: one
L2-normalised mean vector per label, prediction by highest cosine with
ties going to the lexicographically smallest label.  A remote classifier
speaking ``POST {base_url}/classify`` is supported through
:func:`classify_texts` for deployments with a trained model service.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from medshot.corpus import Corpus
from medshot.embedding import (
    EmbeddingStore,
    EndpointError,
    StoreFormatError,
    _post_with_retries,
    read_store_file,
    save_store,
)


@dataclass
class CentroidModel:
    """Per-label unit centroids; labels are kept sorted lexicographically."""

    labels: list[str]
    centroids: np.ndarray
    instruction: str


@dataclass(frozen=True)
class TypePrediction:
    label: str
    score: float
    runner_up: str | None = None


@dataclass(frozen=True)
class ClassifierEndpoint:
    """Connection settings for a remote question-type classifier."""

    base_url: str
    timeout: float = 30.0
    retries: int = 2


class ClassifierError(Exception):
    """Remote classifier transport/contract failure."""


def train_centroids(store: EmbeddingStore, corpus: Corpus) -> CentroidModel:
    """Fit one unit centroid per question type from stored vectors.

    Every store id must reference a corpus pair carrying a qtype; at
    least two distinct labels are required (a single label cannot
    discriminate anything).
    """
    pair_by_id = corpus.by_id()
    members: dict[str, list[int]] = {}
    for row, pid in enumerate(store.ids):
        pair = pair_by_id.get(pid)
        if pair is None:
            raise ValueError(f"store id {pid!r} is not present in corpus {corpus.name!r}")
        if pair.qtype is None:
            raise ValueError(f"pair {pid!r} has no question type; cannot train a classifier on it")
        members.setdefault(pair.qtype, []).append(row)
    labels = sorted(members)
    if len(labels) < 2:
        raise ValueError(
            f"classifier needs at least two question types, got {len(labels)}"
        )
    centroids = np.empty((len(labels), store.dim), dtype=np.float64)
    for i, label in enumerate(labels):
        mean = store.matrix[members[label]].mean(axis=0)
        norm = float(np.linalg.norm(mean))
        if norm == 0.0:
            raise ValueError(f"label {label!r} has a zero centroid; vectors cancel out")
        centroids[i] = mean / norm
    return CentroidModel(labels=labels, centroids=centroids, instruction=store.instruction)


def predict_type(model: CentroidModel, query: np.ndarray) -> TypePrediction:
    """Predict the label whose centroid has the highest cosine with ``query``.

    Scale-invariant in the query; exact ties resolve to the
    lexicographically smallest label (labels are stored sorted, and
    argmax takes the first maximum).
    """
    q = np.asarray(query, dtype=np.float64)
    norm = float(np.linalg.norm(q))
    if norm == 0.0:
        raise ValueError("cannot classify a zero-norm query vector")
    scores = model.centroids @ (q / norm)
    best = int(np.argmax(scores))
    runner_up = None
    if len(model.labels) > 1:
        rest = np.delete(scores, best)
        second = int(np.argmax(rest))
        if second >= best:
            second += 1
        runner_up = model.labels[second]
    return TypePrediction(label=model.labels[best], score=float(scores[best]), runner_up=runner_up)


def eval_classifier(
    model: CentroidModel, store: EmbeddingStore, corpus: Corpus
) -> tuple[float, dict[str, dict[str, int]]]:
    """Accuracy and confusion counts over labelled pairs present in the store.

    The confusion map is ``confusion[true_label][predicted_label] ->
    count``; row sums equal the number of evaluated pairs per true
    label.  Raises when no labelled pair has a stored vector.
    """
    total = 0
    correct = 0
    confusion: dict[str, dict[str, int]] = {}
    for pair in corpus.pairs:
        if pair.qtype is None or pair.id not in store:
            continue
        pred = predict_type(model, store.vector(pair.id))
        row = confusion.setdefault(pair.qtype, {})
        row[pred.label] = row.get(pred.label, 0) + 1
        total += 1
        if pred.label == pair.qtype:
            correct += 1
    if total == 0:
        raise ValueError("no labelled pairs with stored vectors to evaluate")
    return correct / total, confusion


def classify_texts(
    endpoint: ClassifierEndpoint, texts: Sequence[str]
) -> tuple[list[str], list[float]]:
    """Classify texts through a remote service.

    Contract: ``POST {base_url}/classify`` with ``{"texts"}`` returning
    ``{"labels", "scores"}`` aligned with the input order.
    """
    if not texts:
        raise ValueError("classify_texts requires at least one text")
    url = endpoint.base_url.rstrip("/") + "/classify"
    try:
        resp = _post_with_retries(url, {"texts": list(texts)}, endpoint.timeout, endpoint.retries)
    except EndpointError as exc:
        raise ClassifierError(str(exc)) from exc
    if resp.status_code != 200:
        raise ClassifierError(f"classifier returned HTTP {resp.status_code}: {resp.text[:200]}")
    try:
        payload = resp.json()
        labels = [str(x) for x in payload["labels"]]
        scores = [float(x) for x in payload["scores"]]
    except (ValueError, KeyError, TypeError) as exc:
        raise ClassifierError(f"malformed classifier response: {exc}") from exc
    if len(labels) != len(texts) or len(scores) != len(texts):
        raise ClassifierError(
            f"classifier returned {len(labels)} labels / {len(scores)} scores "
            f"for {len(texts)} texts"
        )
    return labels, scores


def save_model(model: CentroidModel, path: str | Path) -> Path:
    """Persist centroids in the embedding-store format, labels as ids."""
    store = EmbeddingStore(model.instruction, model.labels, model.centroids)
    return save_store(store, path)


def load_model(path: str | Path) -> CentroidModel:
    """Load a centroid model saved by :func:`save_model`."""
    instruction, _dim, labels, matrix = read_store_file(path)
    if labels != sorted(labels):
        raise StoreFormatError(f"{path}: centroid labels are not sorted")
    return CentroidModel(labels=labels, centroids=matrix, instruction=instruction)
