"""Campaign registry, scene-to-context lookup table construction, and
timestamp lookups for the ad gateway.

The LUT is an immutable, versioned snapshot: lookups binary-search the
time-sorted entries of one content, and a rebuild produces a whole new
snapshot that callers swap in atomically.
"""
from __future__ import annotations

import bisect
import hashlib
import json
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .aggregator import (
    AggregationConfig,
    QueryEmbeddingBundle,
    SafetyPolicy,
    multimodal_search,
    parse_bundle,
    parse_config,
    parse_policy,
)
from .pipeline import SceneRecord
from .store import EmbeddingStore


@dataclass
class CampaignQuery:
    text: str
    bundle: QueryEmbeddingBundle


@dataclass
class CampaignSpec:
    campaign_id: str
    queries: list[CampaignQuery]
    config: AggregationConfig = field(default_factory=AggregationConfig)
    policy: SafetyPolicy = field(default_factory=SafetyPolicy)
    score_floor: Optional[float] = None
    max_scenes: Optional[int] = None

    def validate(self) -> list[str]:
        errors = []
        if not self.campaign_id:
            errors.append("campaign_id: must be non-empty")
        if not self.queries:
            errors.append("queries: at least one query is required")
        if self.score_floor is not None and not math.isfinite(self.score_floor):
            errors.append("score_floor: must be finite")
        if self.max_scenes is not None and self.max_scenes < 1:
            errors.append("max_scenes: must be >= 1")
        return errors

    def canonical_dict(self) -> dict:
        return {
            "campaign_id": self.campaign_id,
            "queries": [
                {
                    "text": q.text,
                    "embeddings": {
                        "vision": _tolist(q.bundle.vision),
                        "audio": _tolist(q.bundle.audio),
                        "text": _tolist(q.bundle.text_vector),
                    },
                }
                for q in self.queries
            ],
            "config": {
                "weights": {m.value: w for m, w in self.config.weights.items()},
                "thresholds": {
                    m.value: t for m, t in self.config.thresholds.items()
                },
                "top_k": self.config.top_k,
            },
            "policy": {
                "blocked_emotions": sorted(self.policy.blocked_emotions),
                "block_profanity": self.policy.block_profanity,
                "block_hate": self.policy.block_hate,
                "untagged": "strict" if self.policy.strict_untagged else "lenient",
            },
            "score_floor": self.score_floor,
            "max_scenes": self.max_scenes,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "CampaignSpec":
        queries = [
            CampaignQuery(text=q.get("text", ""), bundle=parse_bundle(q))
            for q in obj.get("queries", [])
        ]
        floor = obj.get("score_floor")
        max_scenes = obj.get("max_scenes")
        return cls(
            campaign_id=obj.get("campaign_id", ""),
            queries=queries,
            config=parse_config(obj.get("config")),
            policy=parse_policy(obj.get("policy")),
            score_floor=None if floor is None else float(floor),
            max_scenes=None if max_scenes is None else int(max_scenes),
        )


def _tolist(vec: Optional[np.ndarray]):
    return None if vec is None else [float(x) for x in vec]


class InvalidCampaignError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


class CampaignRegistry:
    """Single-writer campaign storage. Registration is idempotent on an
    identical resubmission; a changed spec under an existing id bumps the
    version."""

    def __init__(self):
        self._lock = threading.Lock()
        self._campaigns: dict[str, tuple[CampaignSpec, int, str]] = {}

    def register(self, spec: CampaignSpec) -> tuple[int, str]:
        """Returns (version, spec_hash)."""
        errors = spec.validate()
        if errors:
            raise InvalidCampaignError(errors)
        digest = hashlib.sha256(
            json.dumps(spec.canonical_dict(), sort_keys=True).encode()
        ).hexdigest()
        with self._lock:
            existing = self._campaigns.get(spec.campaign_id)
            if existing is not None and existing[2] == digest:
                return existing[1], digest
            version = 1 if existing is None else existing[1] + 1
            self._campaigns[spec.campaign_id] = (spec, version, digest)
            return version, digest

    def get(self, campaign_id: str) -> Optional[tuple[CampaignSpec, int]]:
        with self._lock:
            entry = self._campaigns.get(campaign_id)
            return None if entry is None else (entry[0], entry[1])

    def all(self) -> list[CampaignSpec]:
        with self._lock:
            return [spec for spec, _, _ in self._campaigns.values()]


@dataclass
class ContextEntry:
    """One scene span with every campaign eligible to serve against it."""

    content_id: str
    scene_id: str
    start_s: float
    end_s: float
    campaign_ids: list[str]
    best_score: dict[str, float]
    matched_query: dict[str, str]

    def to_dict(self) -> dict:
        return {
            "content_id": self.content_id,
            "scene_id": self.scene_id,
            "start_s": self.start_s,
            "end_s": self.end_s,
            "campaign_ids": list(self.campaign_ids),
            "best_score": dict(self.best_score),
            "matched_query": dict(self.matched_query),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ContextEntry":
        return cls(
            content_id=obj["content_id"],
            scene_id=obj["scene_id"],
            start_s=float(obj["start_s"]),
            end_s=float(obj["end_s"]),
            campaign_ids=list(obj["campaign_ids"]),
            best_score={k: float(v) for k, v in obj["best_score"].items()},
            matched_query=dict(obj["matched_query"]),
        )


class ContextLUT:
    """Immutable time-indexed lookup table, binary-searchable by timestamp."""

    def __init__(self, entries: Sequence[ContextEntry], version: str):
        self.version = version
        self._by_content: dict[str, list[ContextEntry]] = {}
        for entry in entries:
            self._by_content.setdefault(entry.content_id, []).append(entry)
        self._starts: dict[str, list[float]] = {}
        for content_id, content_entries in self._by_content.items():
            content_entries.sort(key=lambda e: e.start_s)
            self._starts[content_id] = [e.start_s for e in content_entries]

    def __len__(self) -> int:
        return sum(len(v) for v in self._by_content.values())

    def entries(self) -> list[ContextEntry]:
        out = []
        for content_id in sorted(self._by_content):
            out.extend(self._by_content[content_id])
        return out

    def lookup(self, content_id: str, timestamp_s: float) -> Optional[ContextEntry]:
        """The unique entry with start_s <= t < end_s, or None."""
        if not math.isfinite(timestamp_s):
            raise ValueError("timestamp must be finite")
        starts = self._starts.get(content_id)
        if not starts:
            return None
        idx = bisect.bisect_right(starts, timestamp_s) - 1
        if idx < 0:
            return None
        entry = self._by_content[content_id][idx]
        if entry.start_s <= timestamp_s < entry.end_s:
            return entry
        return None

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(
                json.dumps(
                    {"lut_version": self.version, "entry_count": len(self)},
                    sort_keys=True,
                )
            )
            fh.write("\n")
            for entry in self.entries():
                fh.write(json.dumps(entry.to_dict(), sort_keys=True))
                fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "ContextLUT":
        with open(path, "r", encoding="utf-8") as fh:
            header = json.loads(fh.readline())
            entries = [
                ContextEntry.from_dict(json.loads(line))
                for line in fh
                if line.strip()
            ]
        return cls(entries, version=header["lut_version"])


def build_context_lut(
    store: EmbeddingStore,
    campaigns: Sequence[CampaignSpec],
    scenes: Sequence[SceneRecord],
) -> ContextLUT:
    """For every campaign x query, run the multimodal search; a scene enters
    the LUT for a campaign iff its final score clears the campaign's floor
    and it survives the campaign's safety policy. A scene matching several
    queries keeps the max score and the arg-max query. When no floor is
    set, it defaults to mean + std of the campaign's own final scores."""
    scene_index = {s.scene_id: s for s in scenes}
    tags_by_scene = {
        s.scene_id: {
            "emotions": list(s.emotions),
            "profanity_flag": s.profanity_flag,
            "hate_flag": s.hate_flag,
        }
        for s in scenes
    }
    # (scene_id) -> campaign_id -> (score, query_text)
    matches: dict[str, dict[str, tuple[float, str]]] = {}
    for spec in sorted(campaigns, key=lambda c: c.campaign_id):
        config = AggregationConfig(
            weights=dict(spec.config.weights),
            thresholds=dict(spec.config.thresholds),
            top_k=max(len(scene_index), 1),
            filter_before_truncation=True,
        )
        best: dict[str, tuple[float, str]] = {}
        for query in spec.queries:
            result = multimodal_search(
                query.bundle, store, config, spec.policy, tags_by_scene
            )
            for hit in result.hits:
                prev = best.get(hit.scene_id)
                if prev is None or hit.score > prev[0]:
                    best[hit.scene_id] = (hit.score, query.text)
        if not best:
            continue
        floor = spec.score_floor
        if floor is None:
            scores = np.array([s for s, _ in best.values()], dtype=np.float64)
            floor = float(scores.mean() + scores.std())
        eligible = [
            (scene_id, score, qtext)
            for scene_id, (score, qtext) in best.items()
            if score >= floor and scene_id in scene_index
        ]
        eligible.sort(key=lambda e: (-e[1], e[0]))
        if spec.max_scenes is not None:
            eligible = eligible[: spec.max_scenes]
        for scene_id, score, qtext in eligible:
            matches.setdefault(scene_id, {})[spec.campaign_id] = (score, qtext)

    entries = []
    for scene_id in sorted(matches):
        scene = scene_index[scene_id]
        per_campaign = matches[scene_id]
        entries.append(
            ContextEntry(
                content_id=scene.content_id,
                scene_id=scene_id,
                start_s=scene.start_s,
                end_s=scene.end_s,
                campaign_ids=sorted(per_campaign),
                best_score={c: s for c, (s, _) in sorted(per_campaign.items())},
                matched_query={c: q for c, (_, q) in sorted(per_campaign.items())},
            )
        )
    version = _lut_version(entries, campaigns)
    return ContextLUT(entries, version=version)


def _lut_version(
    entries: Sequence[ContextEntry], campaigns: Sequence[CampaignSpec]
) -> str:
    h = hashlib.sha256()
    for spec in sorted(campaigns, key=lambda c: c.campaign_id):
        h.update(json.dumps(spec.canonical_dict(), sort_keys=True).encode())
    for entry in entries:
        h.update(json.dumps(entry.to_dict(), sort_keys=True).encode())
    return h.hexdigest()[:16]
