"""Exact cosine nearest-neighbour retrieval over type-partitioned blocks.

The index holds one vector block per question type plus an ``"*"`` block
covering every stored vector; pairs without a type live only in the
``"*"`` block.  Queries are exact brute-force dot products (vectors are
unit norm, so the dot product is the cosine), ordered by descending
score with ties broken by ascending id, with an optional exclusion set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Collection, Sequence

import numpy as np

from medshot import kernels
from medshot.corpus import Corpus
from medshot.embedding import EmbeddingStore, StoreFormatError, read_store_file, save_store

ALL_LABEL = "*"


@dataclass(frozen=True)
class Neighbor:
    """One retrieval hit: stored id and its cosine score against the query."""

    id: str
    score: float


@dataclass
class VectorBlock:
    """A contiguous slab of unit vectors sharing one question-type label."""

    label: str
    ids: list[str]
    matrix: np.ndarray
    id_rank: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        order = {pid: r for r, pid in enumerate(sorted(self.ids))}
        self.id_rank = np.fromiter(
            (order[pid] for pid in self.ids), dtype=np.int64, count=len(self.ids)
        )

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class TypePartitionedIndex:
    """Per-type vector blocks plus the all-vectors block under ``"*"``."""

    blocks: dict[str, VectorBlock]
    all_block: VectorBlock
    dim: int

    def labels(self) -> list[str]:
        """Known filter labels: the type labels plus ``"*"``."""
        return sorted(self.blocks) + [ALL_LABEL]

    def block_for(self, type_filter: str | None) -> VectorBlock:
        if type_filter is None or type_filter == ALL_LABEL:
            return self.all_block
        if type_filter not in self.blocks:
            known = ", ".join(repr(label) for label in self.labels())
            raise ValueError(f"unknown type filter {type_filter!r}; known labels: {known}")
        return self.blocks[type_filter]


def build_index(store: EmbeddingStore, corpus: Corpus) -> TypePartitionedIndex:
    """Partition a store's vectors by the question type of their pairs.

    Every store id must belong to the corpus; the first missing id is
    named in the error.  Block row order follows store order, so index
    construction is deterministic.
    """
    pair_by_id = corpus.by_id()
    for pid in store.ids:
        if pid not in pair_by_id:
            raise ValueError(f"store id {pid!r} is not present in corpus {corpus.name!r}")
    typed_rows: dict[str, list[int]] = {}
    for row, pid in enumerate(store.ids):
        qtype = pair_by_id[pid].qtype
        if qtype is not None:
            typed_rows.setdefault(qtype, []).append(row)
    blocks = {
        label: VectorBlock(
            label=label,
            ids=[store.ids[r] for r in rows],
            matrix=np.ascontiguousarray(store.matrix[rows]),
        )
        for label, rows in typed_rows.items()
    }
    all_block = VectorBlock(label=ALL_LABEL, ids=list(store.ids), matrix=store.matrix.copy())
    return TypePartitionedIndex(blocks=blocks, all_block=all_block, dim=store.dim)


def query_topk(
    index: TypePartitionedIndex,
    query: np.ndarray,
    k: int,
    type_filter: str | None = None,
    exclude_ids: Collection[str] = (),
) -> list[Neighbor]:
    """Exact top-k cosine retrieval.

    Returns ``min(k, available)`` neighbours sorted by descending score,
    ties broken by ascending id.  ``exclude_ids`` are never returned.
    Raises for ``k < 1``, a query of the wrong dimension, or an unknown
    ``type_filter`` (the error lists the known labels).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    q = np.ascontiguousarray(query, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != index.dim:
        raise ValueError(f"query has shape {q.shape}, index dimension is {index.dim}")
    block = index.block_for(type_filter)
    if len(block) == 0:
        return []
    if exclude_ids:
        excluded = set(exclude_ids)
        allowed = np.fromiter(
            (pid not in excluded for pid in block.ids), dtype=np.bool_, count=len(block)
        )
    else:
        allowed = np.ones(len(block), dtype=np.bool_)
    idx, scores = kernels.topk(block.matrix, q, block.id_rank, allowed, k)
    return [Neighbor(id=block.ids[i], score=float(s)) for i, s in zip(idx, scores)]


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity of two vectors, clamped into [-1, 1].

    Raises on zero-norm inputs, for which the cosine is undefined.
    """
    a = np.asarray(u, dtype=np.float64)
    b = np.asarray(v, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("cosine is undefined for zero-norm vectors")
    value = float(np.dot(a, b) / (norm_a * norm_b))
    return max(-1.0, min(1.0, value))


# ── optional persistence ────────────────────────────────────────────────────
#
# One store-format file per block plus a JSON manifest.  The "*" block is
# stored like any other under a reserved filename.


def save_index(index: TypePartitionedIndex, dirpath: str | Path) -> Path:
    """Persist an index as one store-format file per block plus a manifest."""
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    ordered = sorted(index.blocks)
    files: dict[str, str] = {}
    for i, label in enumerate(ordered):
        files[label] = f"block_{i:04d}.jsonl"
    files[ALL_LABEL] = "block_all.jsonl"
    for label, filename in files.items():
        block = index.all_block if label == ALL_LABEL else index.blocks[label]
        save_store(EmbeddingStore("", block.ids, block.matrix), dirpath / filename)
    manifest = {
        "dim": index.dim,
        "labels": ordered,
        "counts": {label: len(index.blocks[label]) for label in ordered}
        | {ALL_LABEL: len(index.all_block)},
        "files": files,
    }
    (dirpath / "manifest.json").write_text(
        json.dumps(manifest, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return dirpath


def load_index(dirpath: str | Path) -> TypePartitionedIndex:
    """Load an index persisted by :func:`save_index`."""
    dirpath = Path(dirpath)
    manifest_path = dirpath / "manifest.json"
    if not manifest_path.is_file():
        raise StoreFormatError(f"{manifest_path}: missing index manifest")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    dim = int(manifest["dim"])
    blocks: dict[str, VectorBlock] = {}
    all_block: VectorBlock | None = None
    for label, filename in manifest["files"].items():
        _, block_dim, ids, matrix = read_store_file(dirpath / filename)
        if block_dim != dim:
            raise StoreFormatError(
                f"{dirpath / filename}: block dim {block_dim} != manifest dim {dim}"
            )
        block = VectorBlock(label=label, ids=ids, matrix=matrix)
        if label == ALL_LABEL:
            all_block = block
        else:
            blocks[label] = block
    if all_block is None:
        raise StoreFormatError(f"{manifest_path}: manifest lacks the '*' block")
    return TypePartitionedIndex(blocks=blocks, all_block=all_block, dim=dim)
