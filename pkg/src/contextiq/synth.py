"""Seeded synthetic corpus generation.

Emits embedding, scene, query, judgment and campaign files in the same
formats the real pipeline produces, with planted near-duplicate signals so
retrieval tests have known answers. Same seed, same bytes.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np

# caption/metadata share the text-query dimension; 64 keeps random cosine
# noise ~0.12 so planted exact matches dominate after z-scoring
DEFAULT_DIMS = {"video": 12, "audio": 10, "caption": 64, "metadata": 64}
EMOTION_POOL = ("neutral", "joy", "surprise", "anger", "sadness", "disgust", "fear")


def _unit(rng: np.random.Generator, dim: int) -> list[float]:
    v = rng.standard_normal(dim)
    v = v / np.linalg.norm(v)
    return [float(x) for x in v]


def generate_corpus(
    out_dir: str | Path,
    seed: int = 0,
    n_scenes: int = 50,
    n_queries: int = 5,
    dims: Optional[dict[str, int]] = None,
    max_video_segments: int = 3,
) -> dict[str, str]:
    """Write a full synthetic corpus into out_dir and return the file map.

    Every query's text embedding is planted as (a perturbation of) one
    scene's caption embedding, and that scene is marked relevant for the
    query, so a correct end-to-end pipeline ranks it first.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    dims = {**DEFAULT_DIMS, **(dims or {})}

    scene_ids = [f"scene-{i:04d}" for i in range(n_scenes)]
    embeddings = []
    scenes = []
    caption_vectors: dict[str, list[float]] = {}
    scene_len = 30.0
    for i, scene_id in enumerate(scene_ids):
        content_id = f"content-{i // 10:02d}"
        start = float((i % 10) * scene_len)
        n_segments = int(rng.integers(1, max_video_segments + 1))
        for seg in range(n_segments):
            embeddings.append(
                {
                    "scene_id": scene_id,
                    "modality": "video",
                    "segment_index": seg,
                    "dim": dims["video"],
                    "vector": _unit(rng, dims["video"]),
                }
            )
        for modality in ("audio", "caption", "metadata"):
            vec = _unit(rng, dims[modality])
            if modality == "caption":
                caption_vectors[scene_id] = vec
            embeddings.append(
                {
                    "scene_id": scene_id,
                    "modality": modality,
                    "segment_index": 0,
                    "dim": dims[modality],
                    "vector": vec,
                }
            )
        emotions = sorted(
            rng.choice(EMOTION_POOL, size=int(rng.integers(1, 3)), replace=False)
        )
        scenes.append(
            {
                "scene_id": scene_id,
                "content_id": content_id,
                "start_s": start,
                "end_s": start + scene_len,
                "emotions": [str(e) for e in emotions],
                "profanity_flag": bool(rng.random() < 0.1),
                "hate_flag": bool(rng.random() < 0.1),
                "metadata_sentence": "",
            }
        )

    queries = []
    judgments = []
    n_queries = min(n_queries, n_scenes)
    planted = rng.choice(n_scenes, size=n_queries, replace=False)
    for qi, scene_idx in enumerate(planted):
        query_id = f"query-{qi:03d}"
        target = scene_ids[int(scene_idx)]
        queries.append(
            {
                "query_id": query_id,
                "text": f"synthetic query {qi}",
                "embeddings": {
                    "vision": _unit(rng, dims["video"]),
                    "audio": _unit(rng, dims["audio"]),
                    "text": caption_vectors[target],
                },
            }
        )
        for scene_id in scene_ids:
            judgments.append(
                {
                    "query_id": query_id,
                    "scene_id": scene_id,
                    "relevant": 1 if scene_id == target else 0,
                }
            )

    campaigns = [
        {
            "campaign_id": f"campaign-{qi:03d}",
            "queries": [
                {
                    "text": q["text"],
                    "embeddings": q["embeddings"],
                }
            ],
            "config": {"top_k": n_scenes},
            "policy": {"block_hate": True},
            "score_floor": 0.0,
            "max_scenes": 10,
        }
        for qi, q in enumerate(queries)
    ]

    files = {
        "embeddings": str(out / "embeddings.jsonl"),
        "scenes": str(out / "scenes.jsonl"),
        "queries": str(out / "queries.jsonl"),
        "judgments": str(out / "judgments.jsonl"),
        "campaigns": str(out / "campaigns.jsonl"),
    }
    _write(files["embeddings"], embeddings)
    _write(files["scenes"], scenes)
    _write(files["queries"], queries)
    _write(files["judgments"], judgments)
    _write(files["campaigns"], campaigns)
    return files


def _write(path: str, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True))
            fh.write("\n")
