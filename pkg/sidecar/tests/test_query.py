import math

import pytest

from encoder_sidecar import ModelRegistry, embed_query


def norm(vec):
    return math.sqrt(sum(x * x for x in vec))


def test_bundle_shape_and_norms():
    registry = ModelRegistry()
    bundle = embed_query("dogs playing on a beach", registry)
    emb = bundle["embeddings"]
    assert set(emb) == {"vision", "audio", "text"}
    assert len(emb["vision"]) == registry.vision_encoder.dim
    assert len(emb["audio"]) == registry.audio_encoder.dim
    assert len(emb["text"]) == registry.text_encoder.dim
    for key in emb:
        assert abs(norm(emb[key]) - 1.0) <= 1e-5


def test_deterministic():
    assert embed_query("same text") == embed_query("same text")


def test_distinct_texts_differ():
    a = embed_query("dogs")["embeddings"]["text"]
    b = embed_query("cats")["embeddings"]["text"]
    assert a != b


@pytest.mark.parametrize("text", ["", "   "])
def test_empty_text_rejected(text):
    with pytest.raises(ValueError):
        embed_query(text)
