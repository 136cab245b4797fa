import json
from pathlib import Path

from click.testing import CliRunner

from contextiq.cli import main


def run(args):
    return CliRunner().invoke(main, args, catch_exceptions=False)


def make_corpus(tmp_path, seed=7, scenes=20, queries=3):
    out = tmp_path / f"corpus-{seed}"
    result = run([
        "synth", "--out", str(out), "--seed", str(seed),
        "--scenes", str(scenes), "--queries", str(queries),
    ])
    assert result.exit_code == 0
    return out, json.loads(result.output)


class TestSynth:
    def test_emits_file_map(self, tmp_path):
        out, files = make_corpus(tmp_path)
        for key in ("embeddings", "scenes", "queries", "judgments", "campaigns"):
            assert Path(files[key]).exists()

    def test_same_seed_same_bytes(self, tmp_path):
        out_a, files_a = make_corpus(tmp_path / "a", seed=7)
        out_b, files_b = make_corpus(tmp_path / "b", seed=7)
        for key in files_a:
            assert Path(files_a[key]).read_bytes() == Path(files_b[key]).read_bytes()

    def test_different_seed_differs(self, tmp_path):
        _, files_a = make_corpus(tmp_path / "a", seed=7)
        _, files_b = make_corpus(tmp_path / "b", seed=8)
        assert (
            Path(files_a["embeddings"]).read_bytes()
            != Path(files_b["embeddings"]).read_bytes()
        )


class TestIngest:
    def test_store_round_trip(self, tmp_path):
        _, files = make_corpus(tmp_path)
        store_dir = tmp_path / "store"
        result = run([
            "ingest", "--embeddings", files["embeddings"],
            "--scenes", files["scenes"], "--out", str(store_dir),
        ])
        assert result.exit_code == 0
        assert "rejected 0" in result.output
        assert (store_dir / "embeddings.jsonl").exists()
        assert (store_dir / "scenes.jsonl").exists()
        report = json.loads((store_dir / "report.json").read_text())
        assert report["rejected"] == []

    def test_malformed_lines_rejected_not_fatal(self, tmp_path):
        emb = tmp_path / "emb.jsonl"
        emb.write_text(
            '{"scene_id": "s1", "modality": "caption", "segment_index": 0, '
            '"dim": 2, "vector": [1.0, 0.0]}\n'
            '{"scene_id": "s2", "modality": "caption", "segment_index": 0, '
            '"dim": 3, "vector": [1.0, 0.0]}\n'
        )
        store_dir = tmp_path / "store"
        result = run(["ingest", "--embeddings", str(emb), "--out", str(store_dir)])
        assert result.exit_code == 0
        assert "accepted 1" in result.output
        assert "rejected 1" in result.output


class TestSearch:
    def test_planted_query_top_hit(self, tmp_path):
        _, files = make_corpus(tmp_path)
        store_dir = tmp_path / "store"
        run([
            "ingest", "--embeddings", files["embeddings"],
            "--scenes", files["scenes"], "--out", str(store_dir),
        ])
        queries = [json.loads(line) for line in
                   Path(files["queries"]).read_text().splitlines()]
        judgments = [json.loads(line) for line in
                     Path(files["judgments"]).read_text().splitlines()]
        target = next(
            j["scene_id"] for j in judgments
            if j["query_id"] == queries[0]["query_id"] and j["relevant"]
        )
        request = tmp_path / "request.json"
        request.write_text(json.dumps(queries[0]))
        out_file = tmp_path / "hits.json"
        result = run([
            "search", "--store", str(store_dir), "--request", str(request),
            "--out", str(out_file), "--top-k", "5",
        ])
        assert result.exit_code == 0
        hits = json.loads(out_file.read_text())["hits"]
        assert len(hits) == 5
        assert hits[0]["scene_id"] == target

    def test_malformed_request_fails_cleanly(self, tmp_path):
        _, files = make_corpus(tmp_path)
        store_dir = tmp_path / "store"
        run([
            "ingest", "--embeddings", files["embeddings"],
            "--out", str(store_dir),
        ])
        request = tmp_path / "bad.json"
        request.write_text("{not json")
        result = CliRunner().invoke(
            main, ["search", "--store", str(store_dir), "--request", str(request)]
        )
        assert result.exit_code != 0
        assert "invalid JSON" in result.output


class TestEval:
    def test_metrics_written(self, tmp_path):
        _, files = make_corpus(tmp_path)
        store_dir = tmp_path / "store"
        run([
            "ingest", "--embeddings", files["embeddings"],
            "--scenes", files["scenes"], "--out", str(store_dir),
        ])
        out_dir = tmp_path / "eval"
        result = run([
            "eval", "--store", str(store_dir), "--queries", files["queries"],
            "--judgments", files["judgments"], "--out", str(out_dir),
            "--ks", "1,5,10",
        ])
        assert result.exit_code == 0
        lines = (out_dir / "metrics.csv").read_text().strip().splitlines()
        assert lines[0] == "metric,K,value"
        rows = {tuple(l.split(",")[:2]): float(l.split(",")[2]) for l in lines[1:]}
        # planted signals: every query's target is ranked first
        assert rows[("precision", "1")] == 1.0
        assert rows[("recall", "1")] == 1.0
        assert (out_dir / "per_query.jsonl").exists()
        assert (out_dir / "report.txt").exists()


class TestBuildLut:
    def test_snapshot_written(self, tmp_path):
        _, files = make_corpus(tmp_path)
        store_dir = tmp_path / "store"
        run([
            "ingest", "--embeddings", files["embeddings"],
            "--scenes", files["scenes"], "--out", str(store_dir),
        ])
        lut_file = tmp_path / "lut.jsonl"
        result = run([
            "build-lut", "--store", str(store_dir),
            "--campaigns", files["campaigns"], "--out", str(lut_file),
        ])
        assert result.exit_code == 0
        lines = lut_file.read_text().strip().splitlines()
        header = json.loads(lines[0])
        assert header["entry_count"] == len(lines) - 1
        assert header["entry_count"] >= 1


class TestMetadata:
    def test_sentences_and_tags(self, tmp_path):
        detections = tmp_path / "detections.jsonl"
        frames = []
        for i in range(10):
            frames.append(json.dumps({
                "scene_id": "s1", "frame_index": i,
                "detections": [
                    {"label": "dog", "confidence": 0.9,
                     "bbox": [0.1, 0.1, 0.5, 0.5]}
                ],
            }))
        detections.write_text("\n".join(frames) + "\n")
        profanity = tmp_path / "profanity.jsonl"
        profanity.write_text(json.dumps({"scene_id": "s1", "score": 0.95}) + "\n")
        out_dir = tmp_path / "meta"
        result = run([
            "metadata", "--detections", str(detections),
            "--profanity", str(profanity), "--out", str(out_dir),
        ])
        assert result.exit_code == 0
        sentence = json.loads((out_dir / "sentences.jsonl").read_text())
        assert sentence["scene_id"] == "s1"
        assert "dog" in sentence["text"]
        tags = json.loads((out_dir / "tags.jsonl").read_text())
        assert tags["profanity_flag"] is True
        assert tags["emotions"] == ["neutral"]
