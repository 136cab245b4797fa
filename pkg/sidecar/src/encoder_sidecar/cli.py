"""Command-line front end for the batch extraction and query encoders."""
from __future__ import annotations

import json

import click

from .extract import ExtractPlan, MediaDecodeError, embed_sentences, extract_scene_artifacts
from .query import embed_query


@click.group()
def main() -> None:
    """Encoder/detector sidecar emitting record files for the retrieval engine."""


@main.command(name="embed-query")
@click.argument("text")
@click.option("--out", "out_file", default=None, type=click.Path())
def embed_query_cmd(text: str, out_file) -> None:
    """Encode TEXT into a search request bundle."""
    try:
        bundle = embed_query(text)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    payload = json.dumps(bundle, sort_keys=True)
    if out_file:
        with open(out_file, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
    click.echo(payload)


@main.command()
@click.option("--media", "media_file", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--frame-stride", default=10, type=int)
@click.option("--audio-chunk", "audio_chunk_len_s", default=5.0, type=float)
@click.option("--video-segment", "video_segment_len_s", default=15.0, type=float)
def extract(media_file, out_dir, frame_stride, audio_chunk_len_s, video_segment_len_s) -> None:
    """Extract every record file for one media manifest."""
    plan = ExtractPlan(
        frame_stride=frame_stride,
        audio_chunk_len_s=audio_chunk_len_s,
        video_segment_len_s=video_segment_len_s,
    )
    try:
        manifest = extract_scene_artifacts(media_file, out_dir, plan)
    except MediaDecodeError as exc:
        raise click.ClickException(str(exc))
    click.echo(
        f"wrote {len(manifest['files'])} files, "
        f"{len(manifest['failures'])} stream failures -> {out_dir}"
    )


@main.command(name="embed-sentences")
@click.option("--sentences", "sentences_file", required=True, type=click.Path(exists=True))
@click.option("--out", "out_file", required=True, type=click.Path())
@click.option("--modality", default="metadata", type=click.Choice(["caption", "metadata"]))
def embed_sentences_cmd(sentences_file, out_file, modality) -> None:
    """Embed sentence lines into text-modality embedding records."""
    try:
        n = embed_sentences(sentences_file, out_file, modality)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"wrote {n} {modality} embedding records -> {out_file}")


if __name__ == "__main__":
    main()
