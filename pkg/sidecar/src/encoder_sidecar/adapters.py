"""Deterministic stand-in adapters for the encoder and detector models.

Real inference needs GPU checkpoints this batch tool cannot ship, so every
adapter derives its output from a seeded hash of its inputs: the same input
always produces the same record, dimensions and label schemas are declared
up front, and emitted values stay inside the ranges the downstream fusion
rules expect. Swapping in real models means replacing these classes while
keeping their declared interfaces.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

OBJECT_LABELS = ("person", "dog", "car", "tree", "ball", "chair")
PLACE_LABELS = ("beach", "kitchen", "street", "forest", "stadium")
ACTION_LABELS = (
    "running", "jogging", "cooking", "frying food", "dancing",
    "playing poker", "shuffling cards", "sleeping",
)
EMOTION_LABELS = ("neutral", "joy", "surprise", "anger", "sadness", "disgust", "fear")

# disposition table projecting the raw action labels onto the reduced set
ACTION_CLASS_MAP = (
    {"source_label": "running", "disposition": "keep", "target_label": ""},
    {"source_label": "jogging", "disposition": "combine", "target_label": "running"},
    {"source_label": "cooking", "disposition": "keep", "target_label": ""},
    {"source_label": "frying food", "disposition": "combine", "target_label": "cooking"},
    {"source_label": "dancing", "disposition": "keep", "target_label": ""},
    {"source_label": "playing poker", "disposition": "combine", "target_label": "playing cards"},
    {"source_label": "shuffling cards", "disposition": "combine", "target_label": "playing cards"},
    {"source_label": "sleeping", "disposition": "discard", "target_label": ""},
)


def _rng(*parts) -> np.random.Generator:
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "big"))


def _unit(rng: np.random.Generator, dim: int) -> list[float]:
    v = rng.standard_normal(dim)
    v = v / np.linalg.norm(v)
    return [float(x) for x in v]


@dataclass
class EncoderAdapter:
    """One embedding tower with a declared output dimension."""

    name: str
    dim: int

    def encode_text(self, text: str) -> list[float]:
        if not text:
            raise ValueError(f"{self.name}: cannot encode empty text")
        return _unit(_rng(self.name, "text", text), self.dim)

    def encode_frame(self, content_id: str, time_s: float) -> list[float]:
        return _unit(_rng(self.name, "frame", content_id, round(time_s, 6)), self.dim)

    def encode_audio_chunk(self, content_id: str, time_s: float) -> list[float]:
        return _unit(_rng(self.name, "audio", content_id, round(time_s, 6)), self.dim)


@dataclass
class ObjectDetector:
    labels: tuple[str, ...] = OBJECT_LABELS
    iou_threshold: float = 0.45
    confidence_threshold: float = 0.35

    def detect(self, content_id: str, frame_index: int) -> list[dict]:
        rng = _rng("object-detector", content_id, frame_index)
        detections = []
        for label in self.labels:
            if rng.random() < 0.4:
                x1, y1 = rng.uniform(0.0, 0.5, 2)
                w, h = rng.uniform(0.05, 0.4, 2)
                detections.append({
                    "label": label,
                    "confidence": float(rng.uniform(self.confidence_threshold, 1.0)),
                    "bbox": [float(x1), float(y1), float(x1 + w), float(y1 + h)],
                })
        return detections


@dataclass
class PlaceClassifier:
    labels: tuple[str, ...] = PLACE_LABELS
    softmax_threshold: float = 0.3

    def classify(self, content_id: str, frame_index: int) -> dict:
        rng = _rng("place-classifier", content_id, frame_index)
        softmax = rng.dirichlet(np.ones(len(self.labels)) * 0.5)
        order = np.argsort(-softmax)[:3]
        return {
            "person_area_fraction": float(rng.uniform(0.0, 0.3)),
            "top_predictions": [
                {"label": self.labels[i], "softmax": float(softmax[i])}
                for i in order
            ],
        }


@dataclass
class ActionClassifier:
    labels: tuple[str, ...] = ACTION_LABELS
    temperature: float = 0.6

    def classify_clip(self, content_id: str, scene_id: str, clip_index: int) -> dict[str, float]:
        rng = _rng("action-classifier", content_id, scene_id, clip_index)
        logits = rng.standard_normal(len(self.labels)) / self.temperature
        probs = np.exp(logits - logits.max())
        probs = probs / probs.sum()
        return {label: float(p) for label, p in zip(self.labels, probs)}


@dataclass
class TextTaggers:
    """NER, text-emotion, profanity scoring and the hate ensemble inputs,
    all driven by the scene transcript."""

    emotion_labels: tuple[str, ...] = EMOTION_LABELS
    hate_prompt_template: str = (
        "Given the definition of hate speech and the examples provided, "
        "answer in the structured form FLAG: yes|no after reasoning step "
        "by step. Transcript: {transcript}"
    )

    def entities(self, transcript: str) -> list[dict]:
        rng = _rng("ner", transcript)
        tokens = [t for t in transcript.split() if t.istitle()]
        return [{"text": t} for t in tokens if rng.random() < 0.8]

    def text_emotion(self, transcript: str) -> str:
        rng = _rng("text-emotion", transcript)
        return str(rng.choice(self.emotion_labels))

    def profanity_score(self, transcript: str) -> float:
        return float(_rng("profanity", transcript).uniform(0.0, 1.0))

    def hate_record(self, transcript: str) -> dict:
        rng = _rng("hate", transcript)
        scores = rng.dirichlet(np.ones(3))
        return {
            "hate": float(scores[0]),
            "offensive": float(scores[1]),
            "normal": float(scores[2]),
            "llm_flag": bool(rng.random() < 0.1),
        }


@dataclass
class ShotBoundaryDetector:
    """Fallback scene splitter for manifests that carry no scene list."""

    default_scene_len_s: float = 30.0

    def detect(self, duration_s: float) -> list[tuple[float, float]]:
        if duration_s <= 0:
            raise ValueError("duration must be positive")
        bounds = []
        start = 0.0
        while start < duration_s:
            end = min(start + self.default_scene_len_s, duration_s)
            bounds.append((start, end))
            start = end
        return bounds
