"""Multimodal score fusion: per-modality scoring, z-score normalization
with weights, raw-score thresholding, max-merge, ranking, and brand-safety
filtering.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .store import EmbeddingStore, Modality

# Fixed priority for attributing the contributing modality on score ties.
MODALITY_PRIORITY = (
    Modality.METADATA,
    Modality.CAPTION,
    Modality.VIDEO,
    Modality.AUDIO,
)

SIGMA_EPS = 1e-12


@dataclass
class QueryEmbeddingBundle:
    """Query-side embeddings: the vision vector scores the video DB, the
    audio vector the audio DB, and the text vector both caption and
    metadata DBs. Any vector may be absent, deactivating its modalities."""

    text: str = ""
    vision: Optional[np.ndarray] = None
    audio: Optional[np.ndarray] = None
    text_vector: Optional[np.ndarray] = None

    def vector_for(self, modality: Modality) -> Optional[np.ndarray]:
        if modality is Modality.VIDEO:
            return self.vision
        if modality is Modality.AUDIO:
            return self.audio
        return self.text_vector


@dataclass
class AggregationConfig:
    """Per-modality fusion weights and raw-score thresholds plus the
    result cap. A threshold of -inf disables gating for that modality."""

    weights: dict[Modality, float] = field(default_factory=dict)
    thresholds: dict[Modality, float] = field(default_factory=dict)
    top_k: int = 10
    filter_before_truncation: bool = False

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {self.top_k}")
        for m, w in self.weights.items():
            if not w > 0:
                raise ValueError(f"weight for {m} must be > 0, got {w}")

    def weight(self, modality: Modality) -> float:
        return self.weights.get(modality, 1.0)

    def threshold(self, modality: Modality) -> float:
        return self.thresholds.get(modality, -math.inf)


@dataclass
class SafetyPolicy:
    """Which safety tags disqualify a scene from the result set."""

    blocked_emotions: set[str] = field(default_factory=set)
    block_profanity: bool = False
    block_hate: bool = False
    strict_untagged: bool = True

    def blocks_anything(self) -> bool:
        return bool(self.blocked_emotions) or self.block_profanity or self.block_hate

    def violation(self, tags: Optional[dict]) -> Optional[str]:
        """Reason the scene is blocked, or None if it passes.

        tags is {"emotions": [...], "profanity_flag": bool, "hate_flag":
        bool}; an untagged scene (tags None) is unsafe under the strict
        flag whenever the policy blocks anything at all.
        """
        if tags is None:
            if self.strict_untagged and self.blocks_anything():
                return "untagged"
            return None
        if self.block_hate and tags.get("hate_flag", False):
            return "hate"
        if self.block_profanity and tags.get("profanity_flag", False):
            return "profanity"
        blocked = self.blocked_emotions & set(tags.get("emotions", []))
        if blocked:
            return f"emotion:{sorted(blocked)[0]}"
        return None


@dataclass
class RetrievalHit:
    scene_id: str
    score: float
    modality: Modality
    raw_scores: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "score": self.score,
            "modality": self.modality.value,
            "raw_scores": dict(self.raw_scores),
        }


@dataclass
class RetrievalResult:
    hits: list[RetrievalHit]
    removed: list[tuple[str, str]]  # (scene_id, reason)

    def to_dict(self) -> dict:
        return {
            "hits": [h.to_dict() for h in self.hits],
            "removed": [{"scene_id": s, "reason": r} for s, r in self.removed],
        }


def score_modality(
    bundle: QueryEmbeddingBundle, modality: Modality, store: EmbeddingStore
) -> dict[str, float]:
    """Raw similarity per scene for one modality. Video scenes score as the
    max over their segment similarities; other modalities are a single
    cosine. Scenes lacking the modality are absent from the map."""
    query = bundle.vector_for(modality)
    if query is None:
        raise ValueError(f"bundle has no query vector for {modality.value}")
    scores: dict[str, float] = {}
    for scene_id, _seg, sim in store.similarities(query, modality):
        prev = scores.get(scene_id)
        if prev is None or sim > prev:
            scores[scene_id] = sim
    return scores


def normalize_scores(
    raw: dict[str, float], weight: float = 1.0
) -> dict[str, float]:
    """Weighted population z-scores over the map's entries. Degenerate
    populations (a single entry, or sigma ~ 0) normalize to all zeros."""
    if not raw:
        raise ValueError("cannot normalize an empty score map")
    values = np.fromiter(raw.values(), dtype=np.float64, count=len(raw))
    mu = float(values.mean())
    sigma = float(values.std())  # population std
    if len(raw) == 1 or sigma <= SIGMA_EPS:
        return {k: 0.0 for k in raw}
    return {k: weight * (v - mu) / sigma for k, v in raw.items()}


def threshold_scores(
    raw: dict[str, float], normalized: dict[str, float], alpha: float
) -> dict[str, float]:
    """Keep scenes whose RAW score strictly exceeds alpha; the retained
    value is the NORMALIZED score."""
    if raw.keys() != normalized.keys():
        raise ValueError("raw and normalized maps must share keys")
    return {k: normalized[k] for k, v in raw.items() if v > alpha}


def max_merge(
    maps: dict[Modality, dict[str, float]]
) -> dict[str, tuple[float, Modality]]:
    """Union of keys with the max value per scene; ties attribute the
    contributing modality by fixed priority (metadata > caption > video >
    audio)."""
    if not maps:
        raise ValueError("max_merge needs at least one map")
    merged: dict[str, tuple[float, Modality]] = {}
    for modality in MODALITY_PRIORITY:
        if modality not in maps:
            continue
        for scene_id, value in maps[modality].items():
            prev = merged.get(scene_id)
            if prev is None or value > prev[0]:
                merged[scene_id] = (value, modality)
    return merged


def apply_safety_filter(
    hits: Sequence[RetrievalHit],
    tags_by_scene: dict[str, dict],
    policy: SafetyPolicy,
) -> tuple[list[RetrievalHit], list[tuple[str, str]]]:
    """Drop hits violating the policy, preserving survivor order and
    recording (scene_id, reason) for every removal."""
    kept: list[RetrievalHit] = []
    removed: list[tuple[str, str]] = []
    for hit in hits:
        reason = policy.violation(tags_by_scene.get(hit.scene_id))
        if reason is None:
            kept.append(hit)
        else:
            removed.append((hit.scene_id, reason))
    return kept, removed


def multimodal_search(
    bundle: QueryEmbeddingBundle,
    store: EmbeddingStore,
    config: Optional[AggregationConfig] = None,
    policy: Optional[SafetyPolicy] = None,
    tags_by_scene: Optional[dict[str, dict]] = None,
) -> RetrievalResult:
    """Full fusion pipeline: per-modality scoring, normalization,
    raw-score thresholding, max-merge, descending sort (ties by scene_id),
    top-k truncation, then brand-safety filtering."""
    config = config or AggregationConfig()
    policy = policy or SafetyPolicy()
    tags_by_scene = tags_by_scene or {}

    raw_maps: dict[Modality, dict[str, float]] = {}
    thresholded: dict[Modality, dict[str, float]] = {}
    for modality in Modality:
        if bundle.vector_for(modality) is None:
            continue
        raw = score_modality(bundle, modality, store)
        if not raw:
            continue
        raw_maps[modality] = raw
        normalized = normalize_scores(raw, config.weight(modality))
        thresholded[modality] = threshold_scores(
            raw, normalized, config.threshold(modality)
        )

    if not raw_maps:
        return RetrievalResult(hits=[], removed=[])

    merged = max_merge(thresholded)
    hits = [
        RetrievalHit(
            scene_id=scene_id,
            score=score,
            modality=modality,
            raw_scores={
                m.value: raw_maps[m][scene_id]
                for m in raw_maps
                if scene_id in raw_maps[m]
            },
        )
        for scene_id, (score, modality) in merged.items()
    ]
    hits.sort(key=lambda h: (-h.score, h.scene_id))

    if config.filter_before_truncation:
        hits, removed = apply_safety_filter(hits, tags_by_scene, policy)
        hits = hits[: config.top_k]
    else:
        hits = hits[: config.top_k]
        hits, removed = apply_safety_filter(hits, tags_by_scene, policy)
    return RetrievalResult(hits=hits, removed=removed)


def parse_bundle(obj: dict) -> QueryEmbeddingBundle:
    """Parse the wire/file form: {"text": ..., "embeddings": {"vision":
    [...], "audio": [...], "text": [...]}}."""
    emb = obj.get("embeddings", {})

    def vec(name):
        v = emb.get(name)
        return None if v is None else np.asarray(v, dtype=np.float64)

    return QueryEmbeddingBundle(
        text=obj.get("text", ""),
        vision=vec("vision"),
        audio=vec("audio"),
        text_vector=vec("text"),
    )


def parse_config(obj: Optional[dict]) -> AggregationConfig:
    obj = obj or {}
    weights = {Modality(k): float(v) for k, v in obj.get("weights", {}).items()}
    thresholds = {
        Modality(k): float(v) for k, v in obj.get("thresholds", {}).items()
    }
    return AggregationConfig(
        weights=weights,
        thresholds=thresholds,
        top_k=int(obj.get("top_k", 10)),
        filter_before_truncation=bool(obj.get("filter_before_truncation", False)),
    )


def parse_policy(obj: Optional[dict]) -> SafetyPolicy:
    obj = obj or {}
    return SafetyPolicy(
        blocked_emotions=set(obj.get("blocked_emotions", [])),
        block_profanity=bool(obj.get("block_profanity", False)),
        block_hate=bool(obj.get("block_hate", False)),
        strict_untagged=obj.get("untagged", "strict") != "lenient",
    )
