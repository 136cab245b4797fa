"""Fusion of expert-detector outputs into metadata sentences and safety tags.

All functions here are pure, per-scene decision rules over detector files:
object presence voting, place aggregation, action class reduction and
probability voting, the hate-speech ensemble, profanity checks, and
concept-based emotion tagging.
"""
from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .store import DimensionMismatchError

EMOTION_LABELS = frozenset(
    {"neutral", "joy", "surprise", "anger", "sadness", "disgust", "fear"}
)

DEFAULT_OBJECT_MIN_CONFIDENCE = 0.35
DEFAULT_OBJECT_MIN_FRAME_FRACTION = 0.20
DEFAULT_PLACE_MAX_PERSON_AREA = 0.10
DEFAULT_PLACE_MIN_SOFTMAX = 0.30
DEFAULT_ACTION_TOP_N = 3
DEFAULT_ACTION_MIN_MASS_FRACTION = 0.15
DEFAULT_PROFANITY_SCORE_THRESHOLD = 0.8
DEFAULT_HATE_THETA = 0.7

# Minimal built-in wordlist; production deployments supply their own file.
DEFAULT_PROFANITY_WORDS = frozenset({"damn", "hell", "crap", "bastard"})


@dataclass
class Detection:
    label: str
    confidence: float
    bbox: tuple[float, float, float, float]


@dataclass
class DetectionFrame:
    scene_id: str
    frame_index: int
    detections: list[Detection]


@dataclass
class PlaceFrame:
    scene_id: str
    frame_index: int
    person_area_fraction: float
    top_predictions: list[tuple[str, float]]  # (label, softmax), sorted desc


@dataclass
class ActionClipProbs:
    scene_id: str
    clip_index: int
    probs: dict[str, float]


@dataclass
class SafetyTags:
    emotions: set[str] = field(default_factory=set)
    profanity_flag: bool = False
    hate_flag: bool = False

    def __post_init__(self):
        unknown = self.emotions - EMOTION_LABELS
        if unknown:
            raise ValueError(f"unknown emotion labels: {sorted(unknown)}")


@dataclass
class EmotionConcept:
    """One concept-to-emotion association with its similarity threshold."""

    concept: str
    emotion: str
    threshold: float
    vector: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.emotion not in EMOTION_LABELS:
            raise ValueError(f"unknown emotion label: {self.emotion!r}")


@dataclass
class MetadataSentence:
    scene_id: str
    text: str
    objects: list[str]
    place: Optional[str]
    actions: list[str]
    entities: list[str]
    emotions: list[str]


class ActionClassMap:
    """Disposition table for raw action labels: discard, keep, or
    combine-into a target label."""

    DISPOSITIONS = ("discard", "keep", "combine")

    def __init__(self, entries: dict[str, tuple[str, Optional[str]]]):
        for label, (disposition, target) in entries.items():
            if disposition not in self.DISPOSITIONS:
                raise ValueError(
                    f"label {label!r}: unknown disposition {disposition!r}"
                )
            if disposition == "combine" and not target:
                raise ValueError(f"label {label!r}: combine requires a target")
        self._entries = entries

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, label: str) -> bool:
        return label in self._entries

    def target(self, label: str) -> Optional[str]:
        """Output class for a label, or None if discarded."""
        disposition, target = self._entries[label]
        if disposition == "discard":
            return None
        if disposition == "keep":
            return label
        return target

    def output_classes(self) -> set[str]:
        out = set()
        for label, (disposition, target) in self._entries.items():
            if disposition == "keep":
                out.add(label)
            elif disposition == "combine":
                out.add(target)
        return out

    def validate_full(self) -> None:
        """Check the published full-size map structure: 710 source labels
        reduced to 185 output classes (96 kept + 89 combined)."""
        if len(self._entries) != 710:
            raise ValueError(f"expected 710 entries, got {len(self._entries)}")
        kept = sum(1 for d, _ in self._entries.values() if d == "keep")
        combined_targets = {
            t for d, t in self._entries.values() if d == "combine"
        }
        if kept != 96 or len(combined_targets) != 89:
            raise ValueError(
                f"expected 96 kept + 89 combined classes, got "
                f"{kept} kept + {len(combined_targets)} combined"
            )

    @classmethod
    def load(cls, path: str | Path) -> "ActionClassMap":
        """Load from CSV (source_label, disposition, target_label) or a JSON
        list of objects with those keys."""
        path = Path(path)
        entries: dict[str, tuple[str, Optional[str]]] = {}
        if path.suffix == ".json":
            rows = json.loads(path.read_text(encoding="utf-8"))
        else:
            with open(path, newline="", encoding="utf-8") as fh:
                rows = list(csv.DictReader(fh))
        for row in rows:
            target = row.get("target_label") or None
            entries[row["source_label"]] = (row["disposition"], target)
        return cls(entries)


def filter_object_presence(
    frames: Sequence[DetectionFrame],
    min_confidence: float = DEFAULT_OBJECT_MIN_CONFIDENCE,
    min_frame_fraction: float = DEFAULT_OBJECT_MIN_FRAME_FRACTION,
) -> set[str]:
    """Labels detected (at or above min_confidence) in at least
    min_frame_fraction of the frames; the boundary is inclusive."""
    if not frames:
        raise ValueError("no detection frames")
    counts: dict[str, int] = {}
    for frame in frames:
        labels = {
            d.label for d in frame.detections if d.confidence >= min_confidence
        }
        for label in labels:
            counts[label] = counts.get(label, 0) + 1
    total = len(frames)
    return {
        label
        for label, count in counts.items()
        if count / total >= min_frame_fraction
    }


def aggregate_place(
    frames: Sequence[PlaceFrame],
    max_person_area: float = DEFAULT_PLACE_MAX_PERSON_AREA,
    min_softmax: float = DEFAULT_PLACE_MIN_SOFTMAX,
) -> Optional[str]:
    """Most frequent place prediction over frames with a clear background
    (person area below max_person_area), counting only predictions with
    softmax above min_softmax. Ties: higher summed softmax, then
    lexicographic. None if nothing is eligible."""
    if not frames:
        raise ValueError("no place frames")
    counts: dict[str, int] = {}
    mass: dict[str, float] = {}
    for frame in frames:
        if frame.person_area_fraction >= max_person_area:
            continue
        for label, softmax in frame.top_predictions:
            if softmax > min_softmax:
                counts[label] = counts.get(label, 0) + 1
                mass[label] = mass.get(label, 0.0) + softmax
    if not counts:
        return None
    return min(counts, key=lambda lbl: (-counts[lbl], -mass[lbl], lbl))


def reduce_action_classes(
    probs: dict[str, float], class_map: ActionClassMap
) -> dict[str, float]:
    """Project raw class probabilities onto the reduced class set:
    discarded labels are dropped, combined labels are summed into their
    target, kept labels pass through."""
    out: dict[str, float] = {}
    for label, p in probs.items():
        if label not in class_map:
            raise ValueError(f"label not in class map: {label!r}")
        target = class_map.target(label)
        if target is not None:
            out[target] = out.get(target, 0.0) + p
    return out


def vote_actions(
    clips: Sequence[dict[str, float]],
    top_n: int = DEFAULT_ACTION_TOP_N,
    min_mass_fraction: float = DEFAULT_ACTION_MIN_MASS_FRACTION,
) -> list[tuple[str, float]]:
    """Probability-weighted voting across clips: score each class by its
    mean probability mass, keep at most top_n classes scoring at least
    min_mass_fraction, descending with lexicographic tie-break."""
    if not clips:
        raise ValueError("no clips to vote over")
    totals: dict[str, float] = {}
    for clip in clips:
        for label, p in clip.items():
            totals[label] = totals.get(label, 0.0) + p
    n = len(clips)
    scored = [
        (label, total / n)
        for label, total in totals.items()
        if total / n >= min_mass_fraction
    ]
    scored.sort(key=lambda e: (-e[1], e[0]))
    return scored[:top_n]


def build_metadata_sentence(
    scene_id: str,
    objects: Sequence[str] = (),
    place: Optional[str] = None,
    actions: Sequence[str] = (),
    entities: Sequence[str] = (),
    emotions: Sequence[str] = (),
) -> MetadataSentence:
    """Deterministic template rendering; empty components drop their clause
    entirely, and fully-empty input yields empty text."""
    clauses = []
    if objects:
        clauses.append(f"This scene contains {', '.join(objects)}.")
    if place:
        clauses.append(f"It takes place in {place}.")
    if actions:
        clauses.append(f"Actions: {', '.join(actions)}.")
    if entities:
        clauses.append(f"Mentions: {', '.join(entities)}.")
    if emotions:
        clauses.append(f"Emotion: {', '.join(emotions)}.")
    return MetadataSentence(
        scene_id=scene_id,
        text=" ".join(clauses),
        objects=list(objects),
        place=place,
        actions=list(actions),
        entities=list(entities),
        emotions=list(emotions),
    )


def detect_profanity(
    transcript: str,
    external_score: Optional[float] = None,
    wordlist: Iterable[str] = DEFAULT_PROFANITY_WORDS,
    score_threshold: float = DEFAULT_PROFANITY_SCORE_THRESHOLD,
) -> bool:
    """True iff the transcript contains a case-insensitive whole-word
    wordlist match, or the external classifier score reaches the threshold."""
    if external_score is not None and external_score >= score_threshold:
        return True
    words = {w.lower() for w in wordlist}
    if not words or not transcript:
        return False
    tokens = re.findall(r"[\w']+", transcript.lower())
    return any(tok in words for tok in tokens)


def ensemble_hate(
    hate_score: float,
    offensive_score: float,
    normal_score: float,
    llm_flag: bool,
    combinator: str = "OR",
    theta: float = DEFAULT_HATE_THETA,
) -> bool:
    """Two-model hate ensemble: the classifier's hate and offensive scores
    are summed and compared (inclusive) against theta, then combined with
    the LLM flag by logical OR or AND."""
    del normal_score  # part of the record schema; not used by the rule
    bert_flag = (hate_score + offensive_score) >= theta
    if combinator == "OR":
        return bert_flag or llm_flag
    if combinator == "AND":
        return bert_flag and llm_flag
    raise ValueError(f"unknown combinator: {combinator!r}")


def tag_emotion_from_concepts(
    scene_embedding: np.ndarray,
    concepts: Sequence[EmotionConcept],
) -> set[str]:
    """Emotions whose concept embedding clears its similarity threshold
    (strict inequality) against the scene embedding."""
    scene = np.asarray(scene_embedding, dtype=np.float64)
    tagged: set[str] = set()
    for entry in concepts:
        if entry.vector is None:
            continue
        vec = np.asarray(entry.vector, dtype=np.float64)
        if vec.shape != scene.shape:
            raise DimensionMismatchError(
                f"concept {entry.concept!r}: dimension {vec.shape[0]} vs "
                f"scene {scene.shape[0]}"
            )
        if float(np.dot(scene, vec)) > entry.threshold:
            tagged.add(entry.emotion)
    return tagged


def merge_emotions(
    text_label: Optional[str] = None,
    visual_tags: Iterable[str] = (),
    audio_tags: Iterable[str] = (),
) -> set[str]:
    """Union of all emotion sources; an empty union defaults to neutral."""
    merged = set(visual_tags) | set(audio_tags)
    if text_label:
        merged.add(text_label)
    unknown = merged - EMOTION_LABELS
    if unknown:
        raise ValueError(f"unknown emotion labels: {sorted(unknown)}")
    return merged if merged else {"neutral"}


def parse_detection_line(obj: dict) -> DetectionFrame:
    detections = []
    for d in obj.get("detections", []):
        bbox = tuple(float(x) for x in d["bbox"])
        x1, y1, x2, y2 = bbox
        if not (x2 > x1 and y2 > y1):
            raise ValueError(f"degenerate bbox: {bbox}")
        detections.append(Detection(d["label"], float(d["confidence"]), bbox))
    return DetectionFrame(obj["scene_id"], int(obj["frame_index"]), detections)


def parse_place_line(obj: dict) -> PlaceFrame:
    preds = [(p["label"], float(p["softmax"])) for p in obj.get("top_predictions", [])]
    return PlaceFrame(
        scene_id=obj["scene_id"],
        frame_index=int(obj["frame_index"]),
        person_area_fraction=float(obj["person_area_fraction"]),
        top_predictions=preds,
    )


def parse_action_line(obj: dict) -> ActionClipProbs:
    return ActionClipProbs(
        scene_id=obj["scene_id"],
        clip_index=int(obj["clip_index"]),
        probs={k: float(v) for k, v in obj["probs"].items()},
    )


@dataclass
class SceneMetadata:
    """Fused per-scene output: the metadata sentence plus safety tags."""

    sentence: MetadataSentence
    tags: SafetyTags


def fuse_scene(
    scene_id: str,
    detection_frames: Sequence[DetectionFrame] = (),
    place_frames: Sequence[PlaceFrame] = (),
    action_clips: Sequence[ActionClipProbs] = (),
    action_map: Optional[ActionClassMap] = None,
    entities: Sequence[str] = (),
    caption_text: str = "",
    text_emotion: Optional[str] = None,
    visual_emotion_tags: Iterable[str] = (),
    audio_emotion_tags: Iterable[str] = (),
    profanity_score: Optional[float] = None,
    hate_record: Optional[dict] = None,
    wordlist: Iterable[str] = DEFAULT_PROFANITY_WORDS,
    hate_combinator: str = "OR",
    hate_theta: float = DEFAULT_HATE_THETA,
) -> SceneMetadata:
    """Run every fusion rule for one scene over its detector outputs."""
    objects = (
        sorted(filter_object_presence(detection_frames))
        if detection_frames
        else []
    )
    place = aggregate_place(place_frames) if place_frames else None
    actions: list[str] = []
    if action_clips and action_map is not None:
        reduced = [
            reduce_action_classes(clip.probs, action_map) for clip in action_clips
        ]
        actions = [label for label, _ in vote_actions(reduced)]
    emotions = merge_emotions(text_emotion, visual_emotion_tags, audio_emotion_tags)
    sentence = build_metadata_sentence(
        scene_id,
        objects=objects,
        place=place,
        actions=actions,
        entities=list(entities),
        emotions=sorted(emotions),
    )
    profanity = detect_profanity(caption_text, profanity_score, wordlist)
    hate = False
    if hate_record is not None:
        hate = ensemble_hate(
            float(hate_record.get("hate", 0.0)),
            float(hate_record.get("offensive", 0.0)),
            float(hate_record.get("normal", 0.0)),
            bool(hate_record.get("llm_flag", False)),
            combinator=hate_combinator,
            theta=hate_theta,
        )
    tags = SafetyTags(emotions=emotions, profanity_flag=profanity, hate_flag=hate)
    return SceneMetadata(sentence=sentence, tags=tags)
