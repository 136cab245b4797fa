"""Batch encoder/detector sidecar for the contextiq retrieval engine."""
from .adapters import (
    ActionClassifier,
    EncoderAdapter,
    ObjectDetector,
    PlaceClassifier,
    ShotBoundaryDetector,
    TextTaggers,
)
from .extract import (
    ExtractPlan,
    MediaDecodeError,
    embed_sentences,
    extract_scene_artifacts,
    load_media_manifest,
    pool_mean_l2,
)
from .query import embed_query
from .registry import ModelRegistry

__version__ = "0.1.0"
