import numpy as np
import pytest

from contextiq.store import EmbeddingRecord, Modality, ingest_embeddings


def unit(rng, dim):
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_store(rng, n_scenes=20, dims=None, max_video_segments=3,
                 modality_presence=1.0):
    """Build a sealed store of random unit vectors. Returns (store, records)."""
    dims = dims or {
        Modality.VIDEO: 8,
        Modality.AUDIO: 6,
        Modality.CAPTION: 5,
        Modality.METADATA: 5,
    }
    records = []
    for i in range(n_scenes):
        scene_id = f"s{i:03d}"
        n_seg = int(rng.integers(1, max_video_segments + 1))
        for seg in range(n_seg):
            records.append(
                EmbeddingRecord(scene_id, Modality.VIDEO, seg, unit(rng, dims[Modality.VIDEO]))
            )
        for modality in (Modality.AUDIO, Modality.CAPTION, Modality.METADATA):
            if rng.random() <= modality_presence:
                records.append(
                    EmbeddingRecord(scene_id, modality, 0, unit(rng, dims[modality]))
                )
    store, report = ingest_embeddings(list(records))
    assert not report.rejected
    return store, records


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
