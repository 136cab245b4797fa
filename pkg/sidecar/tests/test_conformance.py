"""Cross-component conformance: everything this sidecar emits must flow
through the engine's command-line interface with zero rejected records, and
numerical contracts (pooling, unit norms) must agree across the boundary.
"""
import json
import shutil
import subprocess
from pathlib import Path

import pytest

from encoder_sidecar import embed_query, embed_sentences, extract_scene_artifacts

CONTEXTIQ = shutil.which("contextiq")

pytestmark = pytest.mark.skipif(
    CONTEXTIQ is None, reason="contextiq CLI not installed"
)


def read_jsonl(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines()]


def run_cli(args):
    proc = subprocess.run(
        [CONTEXTIQ, *args], capture_output=True, text=True
    )
    assert proc.returncode == 0, proc.stderr or proc.stdout
    return proc.stdout


@pytest.fixture
def artifacts(media_manifest, tmp_path):
    out = tmp_path / "artifacts"
    manifest = extract_scene_artifacts(media_manifest, out)
    assert manifest["failures"] == []
    return out, manifest


@pytest.fixture
def fused(artifacts, tmp_path):
    """Run the engine's metadata fusion over the detector streams."""
    out, manifest = artifacts
    meta_dir = tmp_path / "meta"
    run_cli([
        "metadata",
        "--detections", manifest["files"]["detections"],
        "--places", manifest["files"]["places"],
        "--actions", manifest["files"]["actions"],
        "--action-map", manifest["files"]["action_map"],
        "--captions", manifest["files"]["captions"],
        "--entities", manifest["files"]["entities"],
        "--text-emotion", manifest["files"]["text_emotion"],
        "--profanity", manifest["files"]["profanity"],
        "--hate", manifest["files"]["hate"],
        "--out", str(meta_dir),
    ])
    return meta_dir


@pytest.fixture
def store(artifacts, fused, tmp_path):
    out, manifest = artifacts
    features = tmp_path / "features.jsonl"
    features.write_text(
        Path(manifest["files"]["frame_features"]).read_text()
        + Path(manifest["files"]["audio_features"]).read_text()
    )
    metadata_embeddings = tmp_path / "metadata_embeddings.jsonl"
    embed_sentences(fused / "sentences.jsonl", metadata_embeddings, "metadata")
    store_dir = tmp_path / "store"
    run_cli([
        "ingest",
        "--embeddings", manifest["files"]["caption_embeddings"],
        "--embeddings", str(metadata_embeddings),
        "--boundaries", manifest["files"]["boundaries"],
        "--features", str(features),
        "--tags", str(fused / "tags.jsonl"),
        "--sentences", str(fused / "sentences.jsonl"),
        "--out", str(store_dir),
    ])
    return store_dir


def test_ingest_accepts_every_record(store):
    report = json.loads((store / "report.json").read_text())
    assert report["rejected"] == []


def test_metadata_fusion_consumes_every_stream(fused):
    sentences = {s["scene_id"]: s["text"] for s in read_jsonl(fused / "sentences.jsonl")}
    tags = read_jsonl(fused / "tags.jsonl")
    assert len(sentences) == 2 and len(tags) == 2
    for t in tags:
        assert set(t) == {"scene_id", "emotions", "profanity_flag", "hate_flag"}


def test_pooling_matches_engine(artifacts, store):
    out, manifest = artifacts
    ours = {
        (r["scene_id"], r["segment_index"]): r["vector"]
        for r in read_jsonl(manifest["files"]["pooled_segments"])
    }
    theirs = {
        (r["scene_id"], r["segment_index"]): r["vector"]
        for r in read_jsonl(store / "embeddings.jsonl")
        if r["modality"] == "video"
    }
    assert ours.keys() == theirs.keys()
    for key in ours:
        for a, b in zip(ours[key], theirs[key]):
            assert abs(a - b) <= 1e-6, key


def test_scene_records_carry_fused_tags(store, fused):
    scenes = {s["scene_id"]: s for s in read_jsonl(store / "scenes.jsonl")}
    for t in read_jsonl(fused / "tags.jsonl"):
        scene = scenes[t["scene_id"]]
        assert scene["emotions"] == t["emotions"]
        assert scene["profanity_flag"] == t["profanity_flag"]
        assert scene["hate_flag"] == t["hate_flag"]


def test_query_bundle_searches_end_to_end(store, tmp_path):
    request = tmp_path / "request.json"
    request.write_text(json.dumps(embed_query("a dog runs on the beach")))
    output = run_cli([
        "search", "--store", str(store), "--request", str(request), "--top-k", "2",
    ])
    hits = json.loads(output)["hits"]
    assert 1 <= len(hits) <= 2
    for hit in hits:
        assert hit["scene_id"].startswith("m1-scene-")
