import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contextiq.pipeline import (
    SceneBoundary,
    TimedFeature,
    assemble_scene,
    audio_chunk_schedule,
    build_scenes,
    mean_pool_normalize,
    pool_audio_features,
    pool_frame_features,
    pool_scene_features,
    segment_schedule,
)
from contextiq.store import Modality

from conftest import unit


def frame(scene_id, t, vec):
    return TimedFeature(scene_id, "frame", t, np.asarray(vec, dtype=float))


def chunk(scene_id, t, vec):
    return TimedFeature(scene_id, "audio_chunk", t, np.asarray(vec, dtype=float))


class TestSchedule:
    def test_exact_division(self):
        plan = segment_schedule(45.0)
        assert plan.segments == ((0.0, 15.0), (15.0, 30.0), (30.0, 45.0))

    def test_partial_tail(self):
        plan = segment_schedule(40.0)
        assert plan.segments == ((0.0, 15.0), (15.0, 30.0), (30.0, 40.0))

    def test_audio_chunks(self):
        assert len(audio_chunk_schedule(40.0)) == 8

    def test_short_scene_single_segment(self):
        assert segment_schedule(7.5).segments == ((0.0, 7.5),)

    def test_nonpositive_duration(self):
        with pytest.raises(ValueError):
            segment_schedule(0.0)

    def test_coverage_and_contiguity(self):
        for duration in (0.5, 14.9, 15.0, 29.99, 31.0, 300.0):
            segments = segment_schedule(duration).segments
            assert segments[0][0] == 0.0
            assert segments[-1][1] == duration
            for (_, e1), (s2, _) in zip(segments, segments[1:]):
                assert e1 == s2
            for s, e in segments[:-1]:
                assert e - s == pytest.approx(15.0)


class TestPooling:
    def test_mean_then_normalize(self):
        pooled = pool_frame_features(
            [frame("s", 0.0, [1.0, 0.0]), frame("s", 1.0, [0.0, 1.0])]
        )
        np.testing.assert_allclose(pooled, [0.70710678, 0.70710678], atol=1e-8)

    def test_single_frame_identity(self):
        pooled = pool_frame_features([frame("s", 0.0, [2.0, 0.0])])
        np.testing.assert_allclose(pooled, [1.0, 0.0], atol=1e-12)

    def test_matches_arithmetic_oracle(self, rng):
        frames = [frame("s", float(t), rng.standard_normal(16)) for t in range(7)]
        mat = np.array([f.vector for f in frames])
        expected = mat.mean(axis=0)
        expected = expected / np.linalg.norm(expected)
        np.testing.assert_allclose(pool_frame_features(frames), expected, atol=1e-9)

    def test_audio_pooling_oracle(self):
        pooled = pool_audio_features(
            [chunk("s", 0.0, [1.0, 0.0]), chunk("s", 5.0, [0.0, 1.0]),
             chunk("s", 10.0, [1.0, 0.0])]
        )
        np.testing.assert_allclose(pooled, [0.89442719, 0.4472136], atol=1e-8)

    def test_empty_input_raises(self):
        with pytest.raises(ValueError):
            pool_frame_features([])
        with pytest.raises(ValueError):
            pool_audio_features([])

    @given(st.integers(min_value=0, max_value=5040))
    @settings(max_examples=30, deadline=None)
    def test_permutation_invariance(self, seed):
        rng = np.random.default_rng(7)
        frames = [frame("s", float(t), rng.standard_normal(6)) for t in range(5)]
        perm = np.random.default_rng(seed).permutation(len(frames))
        shuffled = [frames[i] for i in perm]
        np.testing.assert_allclose(
            pool_frame_features(frames), pool_frame_features(shuffled), atol=1e-12
        )

    @given(st.floats(min_value=1e-3, max_value=1e3))
    @settings(max_examples=30, deadline=None)
    def test_scale_covariance(self, c):
        rng = np.random.default_rng(11)
        vecs = [rng.standard_normal(4) for _ in range(3)]
        base = np.mean(vecs, axis=0)
        scaled = np.mean([c * v for v in vecs], axis=0)
        np.testing.assert_allclose(scaled, c * base, rtol=1e-9)
        np.testing.assert_allclose(
            mean_pool_normalize(vecs), mean_pool_normalize([c * v for v in vecs]),
            atol=1e-9,
        )


class TestSceneAssembly:
    def test_counting(self, rng):
        boundary = SceneBoundary("c1", "s1", 0.0, 45.0)
        scene, records = assemble_scene(
            boundary,
            video_segment_embeddings=[unit(rng, 4) for _ in range(3)],
            caption_embedding=unit(rng, 5),
        )
        assert len(records) == 4
        video = [r for r in records if r.modality is Modality.VIDEO]
        assert [r.segment_index for r in video] == [0, 1, 2]
        caption = [r for r in records if r.modality is Modality.CAPTION]
        assert caption[0].segment_index == 0

    def test_metadata_only(self, rng):
        boundary = SceneBoundary("c1", "s1", 0.0, 10.0)
        _, records = assemble_scene(boundary, metadata_embedding=unit(rng, 5))
        assert len(records) == 1

    def test_no_modalities_raises(self):
        boundary = SceneBoundary("c1", "s1", 0.0, 10.0)
        with pytest.raises(ValueError):
            assemble_scene(boundary)

    def test_invalid_boundary(self):
        with pytest.raises(ValueError):
            SceneBoundary("c1", "s1", 10.0, 10.0)

    def test_segment_record_count_matches_nonempty_segments(self, rng):
        boundary = SceneBoundary("c1", "s1", 0.0, 45.0)
        # frames only in segments 0 and 2
        features = [
            frame("s1", 1.0, rng.standard_normal(4)),
            frame("s1", 2.0, rng.standard_normal(4)),
            frame("s1", 31.0, rng.standard_normal(4)),
        ]
        segs, audio = pool_scene_features(boundary, features)
        assert len(segs) == 2
        assert audio is None

    def test_zero_chunks_no_audio_record(self, rng):
        boundary = SceneBoundary("c1", "s1", 0.0, 20.0)
        features = [frame("s1", 1.0, rng.standard_normal(4))]
        scene, records = assemble_scene(
            boundary, *pool_scene_features(boundary, features)
        )
        assert all(r.modality is not Modality.AUDIO for r in records)
        assert scene.scene_id == "s1"


class TestBuildScenes:
    def test_canonical_ordering_and_determinism(self, rng):
        boundaries = [
            SceneBoundary("c2", "s3", 0.0, 20.0),
            SceneBoundary("c1", "s2", 30.0, 50.0),
            SceneBoundary("c1", "s1", 0.0, 30.0),
        ]
        features = {
            s: [frame(s, 1.0, [1.0, 2.0]), chunk(s, 0.0, [0.5, 0.5, 0.1])]
            for s in ("s1", "s2", "s3")
        }
        scenes_a, records_a = build_scenes(boundaries, features)
        scenes_b, records_b = build_scenes(list(reversed(boundaries)), features)
        assert [s.scene_id for s in scenes_a] == ["s1", "s2", "s3"]
        assert [s.scene_id for s in scenes_a] == [s.scene_id for s in scenes_b]
        for ra, rb in zip(records_a, records_b):
            assert ra.key() == rb.key()
            np.testing.assert_array_equal(ra.vector, rb.vector)

    def test_tags_and_sentence_attached(self, rng):
        boundaries = [SceneBoundary("c1", "s1", 0.0, 10.0)]
        scenes, _ = build_scenes(
            boundaries,
            {"s1": [frame("s1", 0.0, [1.0, 0.0])]},
            tags_by_scene={"s1": {"emotions": ["joy"], "hate_flag": True}},
            sentences_by_scene={"s1": "Actions: cooking."},
        )
        assert scenes[0].emotions == ["joy"]
        assert scenes[0].hate_flag is True
        assert scenes[0].metadata_sentence == "Actions: cooking."
