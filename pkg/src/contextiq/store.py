"""Per-modality embedding storage with exact cosine-similarity search.

Vectors are L2-normalized once at ingestion, so every similarity is a plain
dot product. The store is built once, sealed, and read-only afterwards;
queries never mutate it and are safe to run concurrently.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

ZERO_NORM_EPS = 1e-8


class Modality(str, Enum):
    VIDEO = "video"
    AUDIO = "audio"
    CAPTION = "caption"
    METADATA = "metadata"


class DimensionMismatchError(ValueError):
    pass


@dataclass
class EmbeddingRecord:
    """One stored vector, keyed by (scene_id, modality, segment_index).

    Only video scenes carry more than one segment; audio, caption and
    metadata always use segment_index 0.
    """

    scene_id: str
    modality: Modality
    segment_index: int
    vector: np.ndarray

    def key(self) -> tuple[str, str, int]:
        return (self.scene_id, self.modality.value, self.segment_index)


@dataclass
class BuildReport:
    """Outcome of an ingestion run: what was stored and what was dropped."""

    accepted: dict[str, int] = field(default_factory=dict)
    rejected: list[tuple[str, str]] = field(default_factory=list)

    def total_accepted(self) -> int:
        return sum(self.accepted.values())

    def to_dict(self) -> dict:
        return {
            "accepted": dict(self.accepted),
            "rejected": [{"record": k, "reason": r} for k, r in self.rejected],
        }


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of two unit vectors, clamped to [-1, 1] against rounding."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(
            f"vector dimensions differ: {a.shape[0]} vs {b.shape[0]}"
        )
    return float(np.clip(np.dot(a, b), -1.0, 1.0))


def normalize_vector(vector: Sequence[float] | np.ndarray) -> np.ndarray:
    """L2-normalize a vector, rejecting non-finite and near-zero input."""
    v = np.asarray(vector, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("vector must be non-empty and one-dimensional")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector contains non-finite values")
    norm = float(np.linalg.norm(v))
    if norm <= ZERO_NORM_EPS:
        raise ValueError("zero vector")
    return v / norm


class EmbeddingStore:
    """Sealed, immutable index of unit vectors, one matrix per modality."""

    def __init__(
        self,
        matrices: dict[Modality, np.ndarray],
        keys: dict[Modality, list[tuple[str, int]]],
    ):
        self._matrices = matrices
        self._keys = keys
        self._scenes: set[str] = set()
        for modality_keys in keys.values():
            self._scenes.update(scene_id for scene_id, _ in modality_keys)
        for m in self._matrices.values():
            m.setflags(write=False)

    @property
    def scene_ids(self) -> frozenset[str]:
        return frozenset(self._scenes)

    def count(self, modality: Modality) -> int:
        return len(self._keys.get(modality, []))

    def dimension(self, modality: Modality) -> Optional[int]:
        mat = self._matrices.get(modality)
        return None if mat is None else int(mat.shape[1])

    def records(self, modality: Modality) -> Iterator[EmbeddingRecord]:
        mat = self._matrices.get(modality)
        if mat is None:
            return
        for (scene_id, seg), row in zip(self._keys[modality], mat):
            yield EmbeddingRecord(scene_id, modality, seg, row)

    def search(
        self, query_vector: np.ndarray, modality: Modality
    ) -> list[tuple[str, int, float]]:
        """Exact search: one entry per stored record, sorted by descending
        similarity with ties broken by ascending (scene_id, segment_index)."""
        sims = self.similarities(query_vector, modality)
        return sorted(sims, key=lambda e: (-e[2], e[0], e[1]))

    def similarities(
        self, query_vector: np.ndarray, modality: Modality
    ) -> list[tuple[str, int, float]]:
        """Unordered (scene_id, segment_index, similarity) for every record."""
        if not isinstance(modality, Modality):
            raise ValueError(f"unknown modality: {modality!r}")
        mat = self._matrices.get(modality)
        if mat is None:
            return []
        q = np.asarray(query_vector, dtype=np.float64)
        if q.shape != (mat.shape[1],):
            raise DimensionMismatchError(
                f"query dimension {q.shape} does not match "
                f"{modality.value} dimension {mat.shape[1]}"
            )
        scores = np.clip(mat @ q, -1.0, 1.0)
        return [
            (scene_id, seg, float(s))
            for (scene_id, seg), s in zip(self._keys[modality], scores)
        ]

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for modality in Modality:
                for rec in self.records(modality):
                    fh.write(
                        json.dumps(
                            {
                                "scene_id": rec.scene_id,
                                "modality": rec.modality.value,
                                "segment_index": rec.segment_index,
                                "dim": int(rec.vector.shape[0]),
                                "vector": rec.vector.tolist(),
                            },
                            sort_keys=True,
                        )
                    )
                    fh.write("\n")


class StoreBuilder:
    """Single-writer accumulation phase; seal() produces the immutable store."""

    def __init__(self, expected_dims: Optional[dict[Modality, int]] = None):
        self._expected_dims = dict(expected_dims or {})
        self._vectors: dict[Modality, list[np.ndarray]] = {m: [] for m in Modality}
        self._keys: dict[Modality, list[tuple[str, int]]] = {m: [] for m in Modality}
        self._seen: set[tuple[str, str, int]] = set()
        self._dims: dict[Modality, int] = dict(self._expected_dims)
        self.report = BuildReport()
        self._sealed = False

    def add(self, record: EmbeddingRecord) -> Optional[str]:
        """Validate and stage one record. Returns a rejection reason or None."""
        if self._sealed:
            raise RuntimeError("store already sealed")
        reason = self._validate(record)
        key_str = f"{record.scene_id}/{record.modality.value}/{record.segment_index}"
        if reason is not None:
            self.report.rejected.append((key_str, reason))
            return reason
        vec = record.vector / np.linalg.norm(np.asarray(record.vector, dtype=np.float64))
        self._vectors[record.modality].append(np.asarray(vec, dtype=np.float64))
        self._keys[record.modality].append((record.scene_id, record.segment_index))
        self._seen.add(record.key())
        self.report.accepted[record.modality.value] = (
            self.report.accepted.get(record.modality.value, 0) + 1
        )
        return None

    def _validate(self, record: EmbeddingRecord) -> Optional[str]:
        if not isinstance(record.modality, Modality):
            return f"unknown modality: {record.modality!r}"
        if record.segment_index < 0:
            return "negative segment_index"
        if record.modality is not Modality.VIDEO and record.segment_index != 0:
            return "non-video record with segment_index != 0"
        v = np.asarray(record.vector, dtype=np.float64)
        if v.ndim != 1 or v.size == 0:
            return "vector must be non-empty and one-dimensional"
        if not np.all(np.isfinite(v)):
            return "non-finite component"
        if float(np.linalg.norm(v)) <= ZERO_NORM_EPS:
            return "zero vector"
        dim = self._dims.get(record.modality)
        if dim is not None and v.shape[0] != dim:
            return (
                f"dimension mismatch: expected {dim} for "
                f"{record.modality.value}, got {v.shape[0]}"
            )
        if dim is None:
            self._dims[record.modality] = int(v.shape[0])
        if record.key() in self._seen:
            return "duplicate key"
        record.vector = v
        return None

    def seal(self) -> EmbeddingStore:
        """Freeze the staged records into an immutable store."""
        self._sealed = True
        matrices: dict[Modality, np.ndarray] = {}
        keys: dict[Modality, list[tuple[str, int]]] = {}
        for modality in Modality:
            if not self._vectors[modality]:
                continue
            order = sorted(
                range(len(self._keys[modality])),
                key=lambda i: self._keys[modality][i],
            )
            matrices[modality] = np.vstack(
                [self._vectors[modality][i] for i in order]
            )
            keys[modality] = [self._keys[modality][i] for i in order]
        return EmbeddingStore(matrices, keys)


def ingest_embeddings(
    records: Iterable[EmbeddingRecord],
    expected_dims: Optional[dict[Modality, int]] = None,
) -> tuple[EmbeddingStore, BuildReport]:
    """Build a sealed store from a stream of records, reporting rejects."""
    builder = StoreBuilder(expected_dims)
    for record in records:
        builder.add(record)
    store = builder.seal()
    return store, builder.report


def parse_embedding_line(obj: dict) -> EmbeddingRecord:
    """Parse one embedding-file object, raising ValueError on schema errors."""
    try:
        scene_id = obj["scene_id"]
        modality = Modality(obj["modality"])
        segment_index = int(obj["segment_index"])
        dim = int(obj["dim"])
        vector = np.asarray(obj["vector"], dtype=np.float64)
    except (KeyError, ValueError, TypeError) as exc:
        raise ValueError(f"malformed embedding record: {exc}") from exc
    if vector.ndim != 1 or vector.shape[0] != dim:
        raise ValueError(
            f"dim field {dim} does not match vector length {vector.size}"
        )
    return EmbeddingRecord(scene_id, modality, segment_index, vector)


def load_embedding_file(
    path: str | Path,
    expected_dims: Optional[dict[Modality, int]] = None,
) -> tuple[EmbeddingStore, BuildReport]:
    """Ingest a JSON Lines embedding file. Malformed lines are reported,
    not fatal; records may appear in any order."""
    from .jsonl import read_jsonl

    builder = StoreBuilder(expected_dims)
    for lineno, obj in _tolerant_lines(path, builder.report):
        try:
            record = parse_embedding_line(obj)
        except ValueError as exc:
            builder.report.rejected.append((f"line {lineno}", str(exc)))
            continue
        builder.add(record)
    store = builder.seal()
    return store, builder.report


def _tolerant_lines(path: str | Path, report: BuildReport):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                report.rejected.append((f"line {lineno}", f"invalid JSON: {exc}"))
