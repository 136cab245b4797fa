"""Batch artifact extraction: one media manifest in, the full set of record
files the retrieval engine ingests out.

The media manifest is a JSON description of decoded content:

    {"content_id": str, "duration_s": float, "fps": float,
     "scenes": [{"start_s": float, "end_s": float}, ...],   # optional
     "transcript": [{"start_s": float, "end_s": float, "text": str}, ...]}

Frame features honor 1-in-N sampling of the native frame rate, audio is cut
into fixed 5 s chunks, and every output line matches the engine's JSON
Lines schemas. Per-stream model failures are recorded in the run manifest
instead of aborting the whole run.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .registry import ModelRegistry
from .adapters import ACTION_CLASS_MAP

DEFAULT_FRAME_STRIDE = 10
DEFAULT_AUDIO_CHUNK_LEN_S = 5.0
DEFAULT_VIDEO_SEGMENT_LEN_S = 15.0


@dataclass
class ExtractPlan:
    frame_stride: int = DEFAULT_FRAME_STRIDE
    audio_chunk_len_s: float = DEFAULT_AUDIO_CHUNK_LEN_S
    video_segment_len_s: float = DEFAULT_VIDEO_SEGMENT_LEN_S


class MediaDecodeError(ValueError):
    pass


def load_media_manifest(path: str | Path) -> dict:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise MediaDecodeError(f"{path}: cannot decode media manifest: {exc}")
    for key in ("content_id", "duration_s", "fps"):
        if key not in obj:
            raise MediaDecodeError(f"{path}: missing field {key!r}")
    if float(obj["duration_s"]) <= 0 or float(obj["fps"]) <= 0:
        raise MediaDecodeError(f"{path}: duration_s and fps must be positive")
    return obj


def pool_mean_l2(vectors: list[list[float]]) -> list[float]:
    """Mean then L2 — the same pooling contract the engine applies, kept as
    an independent implementation so cross-component equivalence is a real
    check and not a tautology."""
    mat = np.asarray(vectors, dtype=np.float64)
    pooled = mat.mean(axis=0)
    return [float(x) for x in pooled / np.linalg.norm(pooled)]


def _intervals(start_s: float, end_s: float, step_s: float) -> list[tuple[float, float]]:
    out = []
    t = start_s
    while t < end_s:
        out.append((t, min(t + step_s, end_s)))
        t += step_s
    return out


def _scene_transcript(transcript: list[dict], start_s: float, end_s: float) -> str:
    parts = [
        seg["text"]
        for seg in transcript
        if seg["start_s"] < end_s and seg["end_s"] > start_s
    ]
    return " ".join(p for p in parts if p).strip()


def extract_scene_artifacts(
    media_path: str | Path,
    out_dir: str | Path,
    plan: ExtractPlan | None = None,
    registry: ModelRegistry | None = None,
) -> dict:
    """Emit every record file for one media manifest; returns the run
    manifest (also written to out_dir/manifest.json)."""
    plan = plan or ExtractPlan()
    registry = registry or ModelRegistry()
    media = load_media_manifest(media_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    content_id = media["content_id"]
    duration = float(media["duration_s"])
    fps = float(media["fps"])
    transcript = media.get("transcript", [])

    if media.get("scenes"):
        spans = [(float(s["start_s"]), float(s["end_s"])) for s in media["scenes"]]
    else:
        spans = registry.shot_detector.detect(duration)
    scenes = [
        {
            "content_id": content_id,
            "scene_id": f"{content_id}-scene-{i:04d}",
            "start_s": start,
            "end_s": end,
        }
        for i, (start, end) in enumerate(spans)
    ]

    failures: list[dict] = []
    files: dict[str, str] = {}

    def emit(name: str, rows: list[dict]) -> None:
        path = out / f"{name}.jsonl"
        with open(path, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row, sort_keys=True))
                fh.write("\n")
        files[name] = str(path)

    def stream(name: str, producer):
        try:
            emit(name, producer())
        except Exception as exc:  # partial emission: record and continue
            failures.append({"stream": name, "error": str(exc)})

    stream("boundaries", lambda: scenes)

    # frame features: every plan.frame_stride-th native frame; time_s is
    # seconds within the scene, per the engine's timed-feature contract
    def frame_rows():
        rows = []
        for scene in scenes:
            first = int(np.ceil(scene["start_s"] * fps))
            last = int(np.ceil(scene["end_s"] * fps))
            for frame_index in range(first, last):
                if frame_index % plan.frame_stride != 0:
                    continue
                absolute_s = frame_index / fps
                rows.append({
                    "scene_id": scene["scene_id"],
                    "stream": "frame",
                    "time_s": absolute_s - scene["start_s"],
                    "vector": registry.vision_encoder.encode_frame(content_id, absolute_s),
                })
        return rows

    stream("frame_features", frame_rows)

    def audio_rows():
        rows = []
        for scene in scenes:
            duration_s = scene["end_s"] - scene["start_s"]
            for start, _end in _intervals(0.0, duration_s, plan.audio_chunk_len_s):
                rows.append({
                    "scene_id": scene["scene_id"],
                    "stream": "audio_chunk",
                    "time_s": start,
                    "vector": registry.audio_encoder.encode_audio_chunk(
                        content_id, scene["start_s"] + start
                    ),
                })
        return rows

    stream("audio_features", audio_rows)

    # caption text + its embedding, one per scene with any transcript
    scene_text = {
        s["scene_id"]: _scene_transcript(transcript, s["start_s"], s["end_s"])
        for s in scenes
    }
    stream("captions", lambda: [
        {"scene_id": sid, "text": text} for sid, text in scene_text.items() if text
    ])
    stream("caption_embeddings", lambda: [
        {
            "scene_id": sid,
            "modality": "caption",
            "segment_index": 0,
            "dim": registry.text_encoder.dim,
            "vector": registry.text_encoder.encode_text(text),
        }
        for sid, text in scene_text.items()
        if text
    ])

    # sidecar-side pooled video segments, for cross-checking the engine
    def segment_rows():
        frames = [json.loads(line) for line in
                  (out / "frame_features.jsonl").read_text().splitlines()]
        rows = []
        for scene in scenes:
            scene_frames = [f for f in frames if f["scene_id"] == scene["scene_id"]]
            duration_s = scene["end_s"] - scene["start_s"]
            # empty segments emit nothing; surviving segments are indexed
            # contiguously, matching the engine's assembly order
            next_index = 0
            for start, end in _intervals(0.0, duration_s, plan.video_segment_len_s):
                inside = [f["vector"] for f in scene_frames
                          if start <= f["time_s"] < end]
                if not inside:
                    continue
                rows.append({
                    "scene_id": scene["scene_id"],
                    "modality": "video",
                    "segment_index": next_index,
                    "dim": registry.vision_encoder.dim,
                    "vector": pool_mean_l2(inside),
                })
                next_index += 1
        return rows

    stream("pooled_segments", segment_rows)

    # detector streams, one record per sampled frame / clip / scene
    def detection_rows():
        rows = []
        for scene in scenes:
            first = int(np.ceil(scene["start_s"] * fps))
            last = int(np.ceil(scene["end_s"] * fps))
            for frame_index in range(first, last):
                if frame_index % plan.frame_stride != 0:
                    continue
                rows.append({
                    "scene_id": scene["scene_id"],
                    "frame_index": frame_index,
                    "detections": registry.object_detector.detect(content_id, frame_index),
                })
        return rows

    stream("detections", detection_rows)

    def place_rows():
        rows = []
        for scene in scenes:
            first = int(np.ceil(scene["start_s"] * fps))
            last = int(np.ceil(scene["end_s"] * fps))
            for frame_index in range(first, last):
                if frame_index % plan.frame_stride != 0:
                    continue
                rows.append({
                    "scene_id": scene["scene_id"],
                    "frame_index": frame_index,
                    **registry.place_classifier.classify(content_id, frame_index),
                })
        return rows

    stream("places", place_rows)

    def action_rows():
        rows = []
        for scene in scenes:
            for idx, _ in enumerate(_intervals(
                scene["start_s"], scene["end_s"], plan.video_segment_len_s
            )):
                rows.append({
                    "scene_id": scene["scene_id"],
                    "clip_index": idx,
                    "probs": registry.action_classifier.classify_clip(
                        content_id, scene["scene_id"], idx
                    ),
                })
        return rows

    stream("actions", action_rows)

    taggers = registry.text_taggers
    with_text = [(sid, text) for sid, text in scene_text.items() if text]
    stream("entities", lambda: [
        {"scene_id": sid, "entities": taggers.entities(text)}
        for sid, text in with_text
    ])
    stream("text_emotion", lambda: [
        {"scene_id": sid, "label": taggers.text_emotion(text)}
        for sid, text in with_text
    ])
    stream("profanity", lambda: [
        {"scene_id": sid, "score": taggers.profanity_score(text)}
        for sid, text in with_text
    ])
    stream("hate", lambda: [
        {"scene_id": sid, **taggers.hate_record(text)} for sid, text in with_text
    ])

    action_map_path = out / "action_map.json"
    action_map_path.write_text(json.dumps(list(ACTION_CLASS_MAP), indent=2))
    files["action_map"] = str(action_map_path)

    manifest = {
        "inputs": [str(media_path)],
        "models": registry.describe(),
        "plan": {
            "frame_stride": plan.frame_stride,
            "audio_chunk_len_s": plan.audio_chunk_len_s,
            "video_segment_len_s": plan.video_segment_len_s,
        },
        "files": files,
        "failures": failures,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


def embed_sentences(
    sentences_path: str | Path,
    out_path: str | Path,
    modality: str = "metadata",
    registry: ModelRegistry | None = None,
) -> int:
    """Embed {"scene_id", "text"} lines (e.g. fused metadata sentences)
    into embedding records for the given text modality; empty texts are
    skipped. Returns the number of records written."""
    if modality not in ("caption", "metadata"):
        raise ValueError(f"unsupported text modality: {modality!r}")
    registry = registry or ModelRegistry()
    written = 0
    with open(sentences_path, encoding="utf-8") as src, \
            open(out_path, "w", encoding="utf-8") as dst:
        for line in src:
            if not line.strip():
                continue
            obj = json.loads(line)
            if not obj.get("text"):
                continue
            record = {
                "scene_id": obj["scene_id"],
                "modality": modality,
                "segment_index": 0,
                "dim": registry.text_encoder.dim,
                "vector": registry.text_encoder.encode_text(obj["text"]),
            }
            dst.write(json.dumps(record, sort_keys=True))
            dst.write("\n")
            written += 1
    return written
