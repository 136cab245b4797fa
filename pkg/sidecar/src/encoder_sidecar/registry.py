"""Named adapter registry: which model backs each stream, and the output
dimension or label schema it declares."""
from __future__ import annotations

from dataclasses import dataclass, field

from .adapters import (
    ActionClassifier,
    EncoderAdapter,
    ObjectDetector,
    PlaceClassifier,
    ShotBoundaryDetector,
    TextTaggers,
)

DEFAULT_DIMS = {"vision": 12, "audio": 10, "text": 64}


@dataclass
class ModelRegistry:
    vision_encoder: EncoderAdapter = field(
        default_factory=lambda: EncoderAdapter("vision-text", DEFAULT_DIMS["vision"])
    )
    audio_encoder: EncoderAdapter = field(
        default_factory=lambda: EncoderAdapter("audio-text", DEFAULT_DIMS["audio"])
    )
    text_encoder: EncoderAdapter = field(
        default_factory=lambda: EncoderAdapter("sentence-text", DEFAULT_DIMS["text"])
    )
    object_detector: ObjectDetector = field(default_factory=ObjectDetector)
    place_classifier: PlaceClassifier = field(default_factory=PlaceClassifier)
    action_classifier: ActionClassifier = field(default_factory=ActionClassifier)
    text_taggers: TextTaggers = field(default_factory=TextTaggers)
    shot_detector: ShotBoundaryDetector = field(default_factory=ShotBoundaryDetector)

    def describe(self) -> dict:
        """Manifest block declaring every adapter's output contract."""
        return {
            "vision_encoder": {"name": self.vision_encoder.name,
                               "dim": self.vision_encoder.dim},
            "audio_encoder": {"name": self.audio_encoder.name,
                              "dim": self.audio_encoder.dim},
            "text_encoder": {"name": self.text_encoder.name,
                             "dim": self.text_encoder.dim},
            "object_detector": {"labels": list(self.object_detector.labels),
                                "iou": self.object_detector.iou_threshold,
                                "confidence": self.object_detector.confidence_threshold},
            "place_classifier": {"labels": list(self.place_classifier.labels),
                                 "softmax": self.place_classifier.softmax_threshold},
            "action_classifier": {"labels": list(self.action_classifier.labels),
                                  "temperature": self.action_classifier.temperature},
            "text_taggers": {"emotions": list(self.text_taggers.emotion_labels)},
            "shot_detector": {"default_scene_len_s":
                              self.shot_detector.default_scene_len_s},
        }
