"""Query-side encoding: one text in, one request-format bundle out."""
from __future__ import annotations

from .registry import ModelRegistry


def embed_query(text: str, registry: ModelRegistry | None = None) -> dict:
    """Encode a query through all three text towers into the search request
    format: three unit vectors at the registry's declared dimensions."""
    if not text or not text.strip():
        raise ValueError("query text must be non-empty")
    registry = registry or ModelRegistry()
    return {
        "text": text,
        "embeddings": {
            "vision": registry.vision_encoder.encode_text(text),
            "audio": registry.audio_encoder.encode_text(text),
            "text": registry.text_encoder.encode_text(text),
        },
    }
