"""Question embeddings: remote embedder client, deterministic mock, store I/O.

The store file format is line-oriented JSON: a header object
``{"dim", "instruction", "count"}`` followed by one ``{"id", "vector"}``
object per entry.  Vectors are unit-norm float64; the norm invariant is
enforced when a store is built and re-verified when one is loaded.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import requests

from medshot.metrics import tokenize_eval

#: Instruction string sent alongside every embedding request (verbatim,
#: including the trailing space).
DEFAULT_INSTRUCTION = "Represent the Medicine sentence for retrieval: "

UNIT_NORM_TOL = 1e-6
MIN_MOCK_DIM = 8

# FNV-1a 64-bit parameters (public-domain hash; fixed so mock embeddings
# are reproducible everywhere).
FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3

#: Base delay (seconds) for exponential retry backoff on transport failures.
RETRY_BACKOFF_BASE = 0.2


class EndpointError(Exception):
    """Transport failure after retries, or a non-200 service response."""


class ProtocolError(Exception):
    """Service responded 200 but the payload violates the wire contract."""


class StoreFormatError(Exception):
    """Store file violates the format; message names the byte offset."""


@dataclass(frozen=True)
class EmbedderEndpoint:
    """Connection settings for a remote embedding service."""

    base_url: str
    timeout: float = 30.0
    max_batch: int = 32
    retries: int = 2

    def __post_init__(self) -> None:
        if self.max_batch < 1:
            raise ValueError(f"max_batch must be >= 1, got {self.max_batch}")
        if self.retries < 0:
            raise ValueError(f"retries must be >= 0, got {self.retries}")


def fnv1a64(data: bytes) -> int:
    """FNV-1a 64-bit hash of ``data``."""
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def hash_bucket(token: str, dim: int) -> int:
    """Deterministic bucket for a token under the published hash."""
    return fnv1a64(token.encode("utf-8")) % dim


def mock_embed(text: str, dim: int) -> np.ndarray:
    """Deterministic bag-of-words feature-hashing embedding.

    Lowercased word tokens are hashed into ``dim`` buckets (+1 each) and
    the vector is L2-normalised, so lexical overlap correlates with
    cosine similarity.  Raises for ``dim`` below 8 or texts with no
    tokens (an empty bag cannot be normalised).
    """
    if dim < MIN_MOCK_DIM:
        raise ValueError(f"mock embedding dim must be >= {MIN_MOCK_DIM}, got {dim}")
    tokens = tokenize_eval(text)
    if not tokens:
        raise ValueError(f"cannot embed text with zero tokens: {text!r}")
    vec = np.zeros(dim, dtype=np.float64)
    for tok in tokens:
        vec[hash_bucket(tok, dim)] += 1.0
    return vec / np.linalg.norm(vec)


def _post_with_retries(url: str, payload: dict, timeout: float, retries: int) -> requests.Response:
    """POST JSON with exponential backoff on transport failures."""
    attempts = retries + 1
    for attempt in range(1, attempts + 1):
        try:
            return requests.post(url, json=payload, timeout=timeout)
        except requests.RequestException as exc:
            if attempt == attempts:
                raise EndpointError(
                    f"transport failure for {url} after {attempts} attempt(s): {exc}"
                ) from exc
            time.sleep(RETRY_BACKOFF_BASE * 2 ** (attempt - 1))
    raise AssertionError("unreachable")


def embed_texts(
    endpoint: EmbedderEndpoint, instruction: str, texts: Sequence[str]
) -> tuple[int, list[np.ndarray]]:
    """Embed ``texts`` through the remote service, preserving order.

    Requests are batched at ``endpoint.max_batch`` texts per call.  The
    service contract is ``POST {base_url}/embed`` with
    ``{"instruction", "texts"}`` returning ``{"dim", "embeddings"}``.
    Returns the service dimension and the raw vectors; callers normalise
    before storage.
    """
    url = endpoint.base_url.rstrip("/") + "/embed"
    dim: int | None = None
    vectors: list[np.ndarray] = []
    for start in range(0, len(texts), endpoint.max_batch):
        batch = list(texts[start : start + endpoint.max_batch])
        resp = _post_with_retries(
            url, {"instruction": instruction, "texts": batch}, endpoint.timeout, endpoint.retries
        )
        if resp.status_code != 200:
            snippet = resp.text[:200]
            raise EndpointError(f"embedder returned HTTP {resp.status_code}: {snippet}")
        try:
            payload = resp.json()
            batch_dim = int(payload["dim"])
            rows = payload["embeddings"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed embedder response: {exc}") from exc
        if dim is None:
            dim = batch_dim
        elif batch_dim != dim:
            raise ProtocolError(
                f"embedding dimension changed across batches: {dim} then {batch_dim}"
            )
        if len(rows) != len(batch):
            raise ProtocolError(
                f"embedder returned {len(rows)} vectors for {len(batch)} texts"
            )
        for row in rows:
            arr = np.asarray(row, dtype=np.float64)
            if arr.ndim != 1 or arr.shape[0] != dim:
                raise ProtocolError(
                    f"embedding vector has shape {arr.shape}, expected ({dim},)"
                )
            vectors.append(arr)
    if dim is None:
        raise ValueError("embed_texts requires at least one text")
    return dim, vectors


class EmbeddingStore:
    """Unit-norm embedding vectors keyed by unique string ids."""

    def __init__(self, instruction: str, ids: Sequence[str], matrix: np.ndarray) -> None:
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ValueError(f"store matrix must be 2-D, got shape {matrix.shape}")
        if len(ids) != matrix.shape[0]:
            raise ValueError(f"{len(ids)} ids for {matrix.shape[0]} vectors")
        if len(set(ids)) != len(ids):
            raise ValueError("store ids must be unique")
        norms = np.linalg.norm(matrix, axis=1) if matrix.shape[0] else np.empty(0)
        bad = np.where(np.abs(norms - 1.0) > UNIT_NORM_TOL)[0]
        if bad.size:
            i = int(bad[0])
            raise ValueError(
                f"vector for id {ids[i]!r} is not unit norm (|v| = {norms[i]:.8f})"
            )
        self.instruction = instruction
        self.ids = list(ids)
        self.matrix = matrix
        self._row = {pid: i for i, pid in enumerate(self.ids)}

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, pair_id: str) -> bool:
        return pair_id in self._row

    def vector(self, pair_id: str) -> np.ndarray:
        return self.matrix[self._row[pair_id]]

    @classmethod
    def build(
        cls, instruction: str, ids: Sequence[str], vectors: Sequence[np.ndarray]
    ) -> "EmbeddingStore":
        """Build a store from raw vectors, L2-normalising each one."""
        if not ids:
            raise ValueError("cannot build an empty embedding store")
        rows = []
        for pid, vec in zip(ids, vectors):
            arr = np.asarray(vec, dtype=np.float64)
            norm = np.linalg.norm(arr)
            if norm == 0.0:
                raise ValueError(f"zero vector for id {pid!r} cannot be normalised")
            rows.append(arr / norm)
        return cls(instruction, ids, np.vstack(rows))


def save_store(store: EmbeddingStore, path: str | Path) -> Path:
    """Write a store in the line-oriented JSON format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        header = {"dim": store.dim, "instruction": store.instruction, "count": len(store)}
        fh.write(json.dumps(header, ensure_ascii=False) + "\n")
        for pid, row in zip(store.ids, store.matrix):
            entry = {"id": pid, "vector": [float(x) for x in row]}
            fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
    return path


def read_store_file(path: str | Path) -> tuple[str, int, list[str], np.ndarray]:
    """Parse a store file, returning (instruction, dim, ids, matrix).

    Format violations raise :class:`StoreFormatError` naming the byte
    offset of the offending line.
    """
    path = Path(path)
    data = path.read_bytes()
    if not data.strip():
        raise StoreFormatError(f"{path}: empty store file at byte offset 0")
    offset = 0
    lines: list[tuple[int, bytes]] = []
    for raw in data.split(b"\n"):
        lines.append((offset, raw))
        offset += len(raw) + 1
    lines = [(off, raw) for off, raw in lines if raw.strip()]
    head_off, head_raw = lines[0]
    try:
        header = json.loads(head_raw)
        dim = int(header["dim"])
        instruction = str(header["instruction"])
        count = int(header["count"])
    except (ValueError, KeyError, TypeError) as exc:
        raise StoreFormatError(
            f"{path}: corrupt header at byte offset {head_off}: {exc}"
        ) from exc
    if dim < 1 or count < 0:
        raise StoreFormatError(
            f"{path}: corrupt header at byte offset {head_off}: dim {dim}, count {count}"
        )
    entries = lines[1:]
    if len(entries) < count:
        raise StoreFormatError(
            f"{path}: truncated payload at byte offset {len(data)}: "
            f"header declares {count} entries, found {len(entries)}"
        )
    if len(entries) > count:
        off = entries[count][0]
        raise StoreFormatError(
            f"{path}: trailing data at byte offset {off}: "
            f"header declares {count} entries, found {len(entries)}"
        )
    ids: list[str] = []
    rows = np.empty((count, dim), dtype=np.float64)
    for i, (off, raw) in enumerate(entries):
        try:
            entry = json.loads(raw)
            pid = str(entry["id"])
            vec = entry["vector"]
        except (ValueError, KeyError, TypeError) as exc:
            raise StoreFormatError(f"{path}: corrupt entry at byte offset {off}: {exc}") from exc
        if not isinstance(vec, list) or len(vec) != dim:
            got = len(vec) if isinstance(vec, list) else "non-list"
            raise StoreFormatError(
                f"{path}: entry {pid!r} at byte offset {off} has {got} components, "
                f"header declares dim {dim}"
            )
        arr = np.asarray(vec, dtype=np.float64)
        norm = float(np.linalg.norm(arr))
        if abs(norm - 1.0) > UNIT_NORM_TOL:
            raise StoreFormatError(
                f"{path}: entry {pid!r} at byte offset {off} is not unit norm (|v| = {norm:.8f})"
            )
        ids.append(pid)
        rows[i] = arr
    return instruction, dim, ids, rows


def load_store(path: str | Path) -> EmbeddingStore:
    """Load a store file, verifying unit norms and id uniqueness."""
    instruction, dim, ids, rows = read_store_file(path)
    try:
        return EmbeddingStore(instruction, ids, rows.reshape(len(ids), dim))
    except ValueError as exc:
        raise StoreFormatError(f"{path}: {exc}") from exc
