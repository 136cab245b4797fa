"""Command-line entry point: ingest, metadata, search, eval, build-lut,
serve, synth. Every subcommand is a pure function of its inputs and flags;
outputs land in the declared paths only.
"""
from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import adservice, metadata as metadata_mod, synth
from .aggregator import parse_bundle, parse_config, parse_policy
from .evaluation import DEFAULT_K_GRID, RelevanceJudgments, run_benchmark
from .jsonl import read_jsonl, write_jsonl
from .pipeline import (
    SceneRecord,
    build_scenes,
    parse_boundary_line,
    parse_feature_line,
)
from .store import (
    EmbeddingStore,
    Modality,
    StoreBuilder,
    load_embedding_file,
    parse_embedding_line,
)

log = logging.getLogger("contextiq")


def _setup_logging() -> None:
    level = os.environ.get("CONTEXTIQ_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _parse_kv_floats(text: str | None) -> dict[str, float]:
    if not text:
        return {}
    out = {}
    for pair in text.split(","):
        key, _, value = pair.partition("=")
        out[key.strip()] = float(value)
    return out


def _load_store_dir(store_dir: str) -> tuple[EmbeddingStore, list[SceneRecord]]:
    store_path = Path(store_dir)
    embeddings = store_path / "embeddings.jsonl"
    if not embeddings.exists():
        raise click.ClickException(f"no embeddings.jsonl in {store_dir}")
    store, report = load_embedding_file(embeddings)
    if report.rejected:
        log.warning("store load rejected %d records", len(report.rejected))
    scenes = []
    scenes_path = store_path / "scenes.jsonl"
    if scenes_path.exists():
        scenes = [SceneRecord.from_dict(obj) for _, obj in read_jsonl(scenes_path)]
    return store, scenes


def _tags_map(scenes: list[SceneRecord]) -> dict[str, dict]:
    return {
        s.scene_id: {
            "emotions": list(s.emotions),
            "profanity_flag": s.profanity_flag,
            "hate_flag": s.hate_flag,
        }
        for s in scenes
    }


@click.group()
def main() -> None:
    """Multimodal scene retrieval and contextual ad targeting toolkit."""
    _setup_logging()


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", default=0, type=int)
@click.option("--scenes", "n_scenes", default=50, type=int)
@click.option("--queries", "n_queries", default=5, type=int)
def synth_cmd(out_dir: str, seed: int, n_scenes: int, n_queries: int) -> None:
    """Generate a seeded synthetic corpus (embeddings, scenes, queries,
    judgments, campaigns)."""
    files = synth.generate_corpus(
        out_dir, seed=seed, n_scenes=n_scenes, n_queries=n_queries
    )
    click.echo(json.dumps(files, sort_keys=True))


main.add_command(synth_cmd, name="synth")


@main.command()
@click.option("--embeddings", "embedding_files", multiple=True, type=click.Path(exists=True))
@click.option("--boundaries", type=click.Path(exists=True))
@click.option("--features", type=click.Path(exists=True))
@click.option("--scenes", "scenes_file", type=click.Path(exists=True))
@click.option("--tags", "tags_file", type=click.Path(exists=True))
@click.option("--sentences", "sentences_file", type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--dims", "dims_json", default=None, help="per-modality dims, JSON")
def ingest(
    embedding_files,
    boundaries,
    features,
    scenes_file,
    tags_file,
    sentences_file,
    out_dir,
    dims_json,
) -> None:
    """Build a sealed store directory from embedding files and/or raw
    boundary+feature files (which are pooled here)."""
    expected_dims = None
    if dims_json:
        expected_dims = {
            Modality(k): int(v) for k, v in json.loads(dims_json).items()
        }
    builder = StoreBuilder(expected_dims)
    scenes: list[SceneRecord] = []

    caption_embeddings: dict[str, np.ndarray] = {}
    metadata_embeddings: dict[str, np.ndarray] = {}
    for path in embedding_files:
        for lineno, obj in read_jsonl(path):
            try:
                record = parse_embedding_line(obj)
            except ValueError as exc:
                builder.report.rejected.append((f"{path}:{lineno}", str(exc)))
                continue
            if boundaries and record.modality in (Modality.CAPTION, Modality.METADATA):
                # pipeline mode: text embeddings join scene assembly instead
                target = (
                    caption_embeddings
                    if record.modality is Modality.CAPTION
                    else metadata_embeddings
                )
                target[record.scene_id] = record.vector
            else:
                builder.add(record)

    if boundaries:
        boundary_objs = [parse_boundary_line(o) for _, o in read_jsonl(boundaries)]
        features_by_scene: dict[str, list] = {}
        if features:
            for _, obj in read_jsonl(features):
                feat = parse_feature_line(obj)
                features_by_scene.setdefault(feat.scene_id, []).append(feat)
        tags_by_scene = {}
        if tags_file:
            for _, obj in read_jsonl(tags_file):
                tags_by_scene[obj["scene_id"]] = obj
        sentences = {}
        if sentences_file:
            for _, obj in read_jsonl(sentences_file):
                sentences[obj["scene_id"]] = obj["text"]
        scenes, records = build_scenes(
            boundary_objs,
            features_by_scene,
            caption_embeddings=caption_embeddings,
            metadata_embeddings=metadata_embeddings,
            tags_by_scene=tags_by_scene,
            sentences_by_scene=sentences,
        )
        for record in records:
            builder.add(record)
    elif scenes_file:
        scenes = [SceneRecord.from_dict(obj) for _, obj in read_jsonl(scenes_file)]

    store = builder.seal()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    store.save(out / "embeddings.jsonl")
    write_jsonl(out / "scenes.jsonl", (s.to_dict() for s in scenes))
    report = builder.report.to_dict()
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    click.echo(
        f"accepted {builder.report.total_accepted()} records, "
        f"rejected {len(builder.report.rejected)}"
    )
    if builder.report.rejected:
        log.warning("rejections written to %s", out / "report.json")


@main.command()
@click.option("--detections", type=click.Path(exists=True))
@click.option("--places", type=click.Path(exists=True))
@click.option("--actions", type=click.Path(exists=True))
@click.option("--action-map", "action_map_file", type=click.Path(exists=True))
@click.option("--captions", type=click.Path(exists=True))
@click.option("--entities", "entities_file", type=click.Path(exists=True))
@click.option("--text-emotion", "text_emotion_file", type=click.Path(exists=True))
@click.option("--profanity", "profanity_file", type=click.Path(exists=True))
@click.option("--hate", "hate_file", type=click.Path(exists=True))
@click.option("--wordlist", "wordlist_file", type=click.Path(exists=True))
@click.option("--hate-combinator", default="OR", type=click.Choice(["OR", "AND"]))
@click.option("--hate-theta", default=metadata_mod.DEFAULT_HATE_THETA, type=float)
@click.option("--out", "out_dir", required=True, type=click.Path())
def metadata(
    detections,
    places,
    actions,
    action_map_file,
    captions,
    entities_file,
    text_emotion_file,
    profanity_file,
    hate_file,
    wordlist_file,
    hate_combinator,
    hate_theta,
    out_dir,
) -> None:
    """Fuse detector output files into metadata sentences and safety tags."""
    by_scene: dict[str, dict] = {}

    def bucket(scene_id: str) -> dict:
        return by_scene.setdefault(
            scene_id,
            {
                "detections": [],
                "places": [],
                "actions": [],
                "entities": [],
                "caption": "",
                "text_emotion": None,
                "profanity_score": None,
                "hate": None,
            },
        )

    if detections:
        for _, obj in read_jsonl(detections):
            frame = metadata_mod.parse_detection_line(obj)
            bucket(frame.scene_id)["detections"].append(frame)
    if places:
        for _, obj in read_jsonl(places):
            frame = metadata_mod.parse_place_line(obj)
            bucket(frame.scene_id)["places"].append(frame)
    if actions:
        for _, obj in read_jsonl(actions):
            clip = metadata_mod.parse_action_line(obj)
            bucket(clip.scene_id)["actions"].append(clip)
    if captions:
        for _, obj in read_jsonl(captions):
            bucket(obj["scene_id"])["caption"] = obj["text"]
    if entities_file:
        for _, obj in read_jsonl(entities_file):
            bucket(obj["scene_id"])["entities"] = [
                e["text"] for e in obj.get("entities", [])
            ]
    if text_emotion_file:
        for _, obj in read_jsonl(text_emotion_file):
            bucket(obj["scene_id"])["text_emotion"] = obj["label"]
    if profanity_file:
        for _, obj in read_jsonl(profanity_file):
            bucket(obj["scene_id"])["profanity_score"] = float(obj["score"])
    if hate_file:
        for _, obj in read_jsonl(hate_file):
            bucket(obj["scene_id"])["hate"] = obj

    action_map = (
        metadata_mod.ActionClassMap.load(action_map_file)
        if action_map_file
        else None
    )
    wordlist = metadata_mod.DEFAULT_PROFANITY_WORDS
    if wordlist_file:
        wordlist = {
            w.strip().lower()
            for w in Path(wordlist_file).read_text(encoding="utf-8").splitlines()
            if w.strip()
        }

    sentences = []
    tags = []
    for scene_id in sorted(by_scene):
        data = by_scene[scene_id]
        fused = metadata_mod.fuse_scene(
            scene_id,
            detection_frames=data["detections"],
            place_frames=data["places"],
            action_clips=data["actions"],
            action_map=action_map,
            entities=data["entities"],
            caption_text=data["caption"],
            text_emotion=data["text_emotion"],
            profanity_score=data["profanity_score"],
            hate_record=data["hate"],
            wordlist=wordlist,
            hate_combinator=hate_combinator,
            hate_theta=hate_theta,
        )
        sentences.append({"scene_id": scene_id, "text": fused.sentence.text})
        tags.append(
            {
                "scene_id": scene_id,
                "emotions": sorted(fused.tags.emotions),
                "profanity_flag": fused.tags.profanity_flag,
                "hate_flag": fused.tags.hate_flag,
            }
        )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(out / "sentences.jsonl", sentences)
    write_jsonl(out / "tags.jsonl", tags)
    click.echo(f"fused {len(by_scene)} scenes")


@main.command()
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--request", "request_file", required=True, type=click.Path(exists=True))
@click.option("--out", "out_file", default=None, type=click.Path())
@click.option("--top-k", default=None, type=int)
@click.option("--weights", default=None, help="modality=weight,...")
@click.option("--thresholds", default=None, help="modality=alpha,...")
def search(store_dir, request_file, out_file, top_k, weights, thresholds) -> None:
    """Run one query from a request file against a store directory."""
    from .aggregator import multimodal_search

    try:
        request = json.loads(Path(request_file).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise click.ClickException(f"{request_file}: invalid JSON: {exc}")
    store, scenes = _load_store_dir(store_dir)
    config_obj = dict(request.get("config") or {})
    if top_k is not None:
        config_obj["top_k"] = top_k
    if weights:
        config_obj.setdefault("weights", {}).update(_parse_kv_floats(weights))
    if thresholds:
        config_obj.setdefault("thresholds", {}).update(_parse_kv_floats(thresholds))
    try:
        result = multimodal_search(
            parse_bundle(request),
            store,
            parse_config(config_obj),
            parse_policy(request.get("policy")),
            _tags_map(scenes),
        )
    except ValueError as exc:
        raise click.ClickException(str(exc))
    payload = json.dumps(result.to_dict(), indent=2, sort_keys=True)
    if out_file:
        Path(out_file).write_text(payload + "\n")
    click.echo(payload)


@main.command(name="eval")
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--queries", "queries_file", required=True, type=click.Path(exists=True))
@click.option("--judgments", "judgments_file", type=click.Path(exists=True))
@click.option("--concept-annotations", type=click.Path(exists=True))
@click.option("--concept-map", "concept_map_file", type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--ks", default=",".join(str(k) for k in DEFAULT_K_GRID))
@click.option("--map-variant", default="standard_AP",
              type=click.Choice(["standard_AP", "mean_precision"]))
@click.option("--top-k", default=None, type=int)
def eval_cmd(
    store_dir,
    queries_file,
    judgments_file,
    concept_annotations,
    concept_map_file,
    out_dir,
    ks,
    map_variant,
    top_k,
) -> None:
    """Run the benchmark harness over a queries file and judgments."""
    from .aggregator import AggregationConfig

    store, scenes = _load_store_dir(store_dir)
    queries = []
    for _, obj in read_jsonl(queries_file):
        queries.append((obj["query_id"], parse_bundle(obj)))
    if judgments_file:
        judgments = RelevanceJudgments.from_binary_file(judgments_file)
    elif concept_annotations and concept_map_file:
        concept_map = {
            obj["query_id"]: obj["concept"]
            for _, obj in read_jsonl(concept_map_file)
        }
        judgments = RelevanceJudgments.from_concept_files(
            concept_annotations, concept_map
        )
    else:
        raise click.ClickException(
            "provide --judgments or --concept-annotations with --concept-map"
        )
    k_list = [int(k) for k in ks.split(",") if k.strip()]
    config = AggregationConfig(top_k=top_k or max(k_list))
    try:
        report = run_benchmark(
            store,
            queries,
            judgments,
            config=config,
            tags_by_scene=_tags_map(scenes),
            ks=k_list,
            map_variant=map_variant,
        )
    except ValueError as exc:
        raise click.ClickException(str(exc))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / "metrics.csv")
    report.write_per_query(out / "per_query.jsonl")
    (out / "report.txt").write_text(report.render_table() + "\n")
    click.echo(report.render_table())


@main.command(name="build-lut")
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--campaigns", "campaigns_file", required=True, type=click.Path(exists=True))
@click.option("--out", "out_file", required=True, type=click.Path())
def build_lut(store_dir, campaigns_file, out_file) -> None:
    """Build the scene-to-context lookup snapshot for a campaign file."""
    store, scenes = _load_store_dir(store_dir)
    registry = adservice.CampaignRegistry()
    for _, obj in read_jsonl(campaigns_file):
        try:
            registry.register(adservice.CampaignSpec.from_dict(obj))
        except adservice.InvalidCampaignError as exc:
            raise click.ClickException(
                f"campaign {obj.get('campaign_id')!r}: {exc}"
            )
    lut = adservice.build_context_lut(store, registry.all(), scenes)
    lut.save(out_file)
    click.echo(f"LUT version {lut.version} with {len(lut)} entries -> {out_file}")


@main.command()
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True))
@click.option("--lut", "lut_file", default=None, type=click.Path())
@click.option("--campaigns", "campaigns_file", default=None, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(store_dir, lut_file, campaigns_file, host, port) -> None:
    """Run the HTTP service over a store directory."""
    import uvicorn

    from .service.app import create_app, load_state

    state = load_state(store_dir, lut_file)
    if campaigns_file:
        for _, obj in read_jsonl(campaigns_file):
            state.registry.register(adservice.CampaignSpec.from_dict(obj))
    app = create_app(state, None if lut_file is None else Path(lut_file))
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
