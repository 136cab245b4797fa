"""Turns long-form content artifacts into scene records and embeddings.

Scene boundaries plus per-frame / per-chunk features come in as JSON Lines;
frame features are mean-pooled per fixed-length segment (15 s default),
audio chunk features are mean-pooled per scene (5 s chunks), and everything
is emitted as unit-normalized embedding records.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .store import EmbeddingRecord, Modality, normalize_vector

DEFAULT_VIDEO_SEGMENT_LEN_S = 15.0
DEFAULT_AUDIO_CHUNK_LEN_S = 5.0
DEFAULT_FRAME_STRIDE = 10


@dataclass(frozen=True)
class SceneBoundary:
    content_id: str
    scene_id: str
    start_s: float
    end_s: float

    def __post_init__(self):
        if not self.end_s > self.start_s:
            raise ValueError(
                f"scene {self.scene_id}: end_s ({self.end_s}) must exceed "
                f"start_s ({self.start_s})"
            )

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass
class TimedFeature:
    scene_id: str
    stream: str  # "frame" or "audio_chunk"
    time_s: float
    vector: np.ndarray


@dataclass(frozen=True)
class SegmentationPlan:
    """Half-open [start, end) intervals covering [0, duration)."""

    video_segment_len_s: float = DEFAULT_VIDEO_SEGMENT_LEN_S
    audio_chunk_len_s: float = DEFAULT_AUDIO_CHUNK_LEN_S
    frame_stride: int = DEFAULT_FRAME_STRIDE
    segments: tuple[tuple[float, float], ...] = ()


@dataclass
class SceneRecord:
    """One retrievable unit: source span, safety tags, metadata sentence."""

    scene_id: str
    content_id: str
    start_s: float
    end_s: float
    emotions: list[str] = field(default_factory=list)
    profanity_flag: bool = False
    hate_flag: bool = False
    metadata_sentence: str = ""

    def to_dict(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "content_id": self.content_id,
            "start_s": self.start_s,
            "end_s": self.end_s,
            "emotions": sorted(self.emotions),
            "profanity_flag": self.profanity_flag,
            "hate_flag": self.hate_flag,
            "metadata_sentence": self.metadata_sentence,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SceneRecord":
        return cls(
            scene_id=obj["scene_id"],
            content_id=obj.get("content_id", ""),
            start_s=float(obj.get("start_s", 0.0)),
            end_s=float(obj.get("end_s", obj.get("start_s", 0.0) + 1.0)),
            emotions=list(obj.get("emotions", [])),
            profanity_flag=bool(obj.get("profanity_flag", False)),
            hate_flag=bool(obj.get("hate_flag", False)),
            metadata_sentence=obj.get("metadata_sentence", ""),
        )


def segment_intervals(
    duration_s: float, segment_len_s: float
) -> list[tuple[float, float]]:
    """Contiguous half-open intervals covering [0, duration); the last one
    may be shorter than segment_len_s."""
    if duration_s <= 0:
        raise ValueError(f"duration must be positive, got {duration_s}")
    if segment_len_s <= 0:
        raise ValueError(f"segment length must be positive, got {segment_len_s}")
    intervals = []
    start = 0.0
    k = 0
    while start < duration_s - 1e-9:
        end = min((k + 1) * segment_len_s, duration_s)
        intervals.append((start, end))
        k += 1
        start = k * segment_len_s
    return intervals


def segment_schedule(
    duration_s: float,
    video_segment_len_s: float = DEFAULT_VIDEO_SEGMENT_LEN_S,
    audio_chunk_len_s: float = DEFAULT_AUDIO_CHUNK_LEN_S,
    frame_stride: int = DEFAULT_FRAME_STRIDE,
) -> SegmentationPlan:
    """Deterministic video segment plan for one scene."""
    return SegmentationPlan(
        video_segment_len_s=video_segment_len_s,
        audio_chunk_len_s=audio_chunk_len_s,
        frame_stride=frame_stride,
        segments=tuple(segment_intervals(duration_s, video_segment_len_s)),
    )


def audio_chunk_schedule(
    duration_s: float, chunk_len_s: float = DEFAULT_AUDIO_CHUNK_LEN_S
) -> list[tuple[float, float]]:
    return segment_intervals(duration_s, chunk_len_s)


def mean_pool_normalize(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Component-wise arithmetic mean, then L2 normalization."""
    if len(vectors) == 0:
        raise ValueError("cannot pool an empty feature set")
    mat = np.asarray([np.asarray(v, dtype=np.float64) for v in vectors])
    if mat.ndim != 2:
        raise ValueError("features must share one dimension")
    return normalize_vector(mat.mean(axis=0))


def pool_frame_features(features: Sequence[TimedFeature]) -> np.ndarray:
    """Segment embedding from the frame features inside one segment."""
    if not features:
        raise ValueError("segment has no frame features")
    return mean_pool_normalize([f.vector for f in features])


def pool_audio_features(features: Sequence[TimedFeature]) -> np.ndarray:
    """Scene-level audio embedding from all of the scene's chunk features."""
    if not features:
        raise ValueError("scene has no audio chunk features")
    return mean_pool_normalize([f.vector for f in features])


def assemble_scene(
    boundary: SceneBoundary,
    video_segment_embeddings: Sequence[np.ndarray] = (),
    audio_embedding: Optional[np.ndarray] = None,
    caption_embedding: Optional[np.ndarray] = None,
    metadata_embedding: Optional[np.ndarray] = None,
    emotions: Sequence[str] = (),
    profanity_flag: bool = False,
    hate_flag: bool = False,
    metadata_sentence: str = "",
) -> tuple[SceneRecord, list[EmbeddingRecord]]:
    """Combine pooled embeddings into one SceneRecord plus its embedding
    records. Video segments take segment_index 0..n-1 in plan order; missing
    modalities are simply absent. At least one modality must be present."""
    records: list[EmbeddingRecord] = []
    for idx, vec in enumerate(video_segment_embeddings):
        records.append(
            EmbeddingRecord(boundary.scene_id, Modality.VIDEO, idx, np.asarray(vec))
        )
    for modality, vec in (
        (Modality.AUDIO, audio_embedding),
        (Modality.CAPTION, caption_embedding),
        (Modality.METADATA, metadata_embedding),
    ):
        if vec is not None:
            records.append(
                EmbeddingRecord(boundary.scene_id, modality, 0, np.asarray(vec))
            )
    if not records:
        raise ValueError(f"scene {boundary.scene_id}: no modality present")
    scene = SceneRecord(
        scene_id=boundary.scene_id,
        content_id=boundary.content_id,
        start_s=boundary.start_s,
        end_s=boundary.end_s,
        emotions=list(emotions),
        profanity_flag=profanity_flag,
        hate_flag=hate_flag,
        metadata_sentence=metadata_sentence,
    )
    return scene, records


def pool_scene_features(
    boundary: SceneBoundary,
    features: Iterable[TimedFeature],
    plan: Optional[SegmentationPlan] = None,
) -> tuple[list[np.ndarray], Optional[np.ndarray]]:
    """Pool a scene's timed features into per-segment video embeddings and
    one optional audio embedding. Empty segments produce no embedding."""
    if plan is None:
        plan = segment_schedule(boundary.duration_s)
    frames = sorted(
        (f for f in features if f.stream == "frame"), key=lambda f: f.time_s
    )
    chunks = [f for f in features if f.stream == "audio_chunk"]
    segment_embeddings: list[np.ndarray] = []
    for start, end in plan.segments:
        in_segment = [f for f in frames if start <= f.time_s < end]
        if in_segment:
            segment_embeddings.append(pool_frame_features(in_segment))
    audio = pool_audio_features(chunks) if chunks else None
    return segment_embeddings, audio


def build_scenes(
    boundaries: Sequence[SceneBoundary],
    features_by_scene: dict[str, list[TimedFeature]],
    caption_embeddings: Optional[dict[str, np.ndarray]] = None,
    metadata_embeddings: Optional[dict[str, np.ndarray]] = None,
    tags_by_scene: Optional[dict[str, dict]] = None,
    sentences_by_scene: Optional[dict[str, str]] = None,
    video_segment_len_s: float = DEFAULT_VIDEO_SEGMENT_LEN_S,
) -> tuple[list[SceneRecord], list[EmbeddingRecord]]:
    """Run the full per-scene assembly, canonically ordered by
    (content_id, start_s). Scenes with zero modalities are skipped."""
    caption_embeddings = caption_embeddings or {}
    metadata_embeddings = metadata_embeddings or {}
    tags_by_scene = tags_by_scene or {}
    sentences_by_scene = sentences_by_scene or {}
    scenes: list[SceneRecord] = []
    records: list[EmbeddingRecord] = []
    for boundary in sorted(boundaries, key=lambda b: (b.content_id, b.start_s)):
        plan = segment_schedule(
            boundary.duration_s, video_segment_len_s=video_segment_len_s
        )
        segs, audio = pool_scene_features(
            boundary, features_by_scene.get(boundary.scene_id, []), plan
        )
        tags = tags_by_scene.get(boundary.scene_id, {})
        try:
            scene, recs = assemble_scene(
                boundary,
                video_segment_embeddings=segs,
                audio_embedding=audio,
                caption_embedding=caption_embeddings.get(boundary.scene_id),
                metadata_embedding=metadata_embeddings.get(boundary.scene_id),
                emotions=tags.get("emotions", []),
                profanity_flag=bool(tags.get("profanity_flag", False)),
                hate_flag=bool(tags.get("hate_flag", False)),
                metadata_sentence=sentences_by_scene.get(boundary.scene_id, ""),
            )
        except ValueError:
            continue
        scenes.append(scene)
        records.extend(recs)
    return scenes, records


def parse_boundary_line(obj: dict) -> SceneBoundary:
    return SceneBoundary(
        content_id=obj["content_id"],
        scene_id=obj["scene_id"],
        start_s=float(obj["start_s"]),
        end_s=float(obj["end_s"]),
    )


def parse_feature_line(obj: dict) -> TimedFeature:
    stream = obj["stream"]
    if stream not in ("frame", "audio_chunk"):
        raise ValueError(f"unknown stream: {stream!r}")
    return TimedFeature(
        scene_id=obj["scene_id"],
        stream=stream,
        time_s=float(obj["time_s"]),
        vector=np.asarray(obj["vector"], dtype=np.float64),
    )
