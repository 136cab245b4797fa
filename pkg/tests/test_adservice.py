import math
import threading

import numpy as np
import pytest

from contextiq.adservice import (
    CampaignQuery,
    CampaignRegistry,
    CampaignSpec,
    ContextEntry,
    ContextLUT,
    InvalidCampaignError,
    build_context_lut,
)
from contextiq.aggregator import QueryEmbeddingBundle, SafetyPolicy
from contextiq.pipeline import SceneRecord
from contextiq.store import Modality

from conftest import random_store, unit


def make_spec(campaign_id="c1", queries=None, **kwargs):
    if queries is None:
        queries = [CampaignQuery("dogs", QueryEmbeddingBundle(text_vector=np.ones(4) / 2.0))]
    return CampaignSpec(campaign_id=campaign_id, queries=queries, **kwargs)


def scene_records(store):
    return [
        SceneRecord(scene_id=s, content_id="content-0", start_s=30.0 * i,
                    end_s=30.0 * (i + 1))
        for i, s in enumerate(sorted(store.scene_ids))
    ]


class TestRegistry:
    def test_round_trip(self):
        registry = CampaignRegistry()
        spec = make_spec()
        version, digest = registry.register(spec)
        assert version == 1
        stored, stored_version = registry.get("c1")
        assert stored_version == 1
        assert stored.canonical_dict() == spec.canonical_dict()

    def test_zero_queries_rejected(self):
        registry = CampaignRegistry()
        with pytest.raises(InvalidCampaignError, match="queries"):
            registry.register(make_spec(queries=[]))

    def test_idempotent_resubmission(self):
        registry = CampaignRegistry()
        v1, _ = registry.register(make_spec())
        v2, _ = registry.register(make_spec())
        assert v1 == v2 == 1

    def test_changed_spec_bumps_version(self):
        registry = CampaignRegistry()
        registry.register(make_spec())
        v2, _ = registry.register(make_spec(score_floor=0.5))
        assert v2 == 2

    def test_nonfinite_floor_rejected(self):
        registry = CampaignRegistry()
        with pytest.raises(InvalidCampaignError, match="score_floor"):
            registry.register(make_spec(score_floor=math.nan))


class TestLutBuild:
    def test_planted_scene_enters_lut(self, rng):
        dims = {
            Modality.VIDEO: 8, Modality.AUDIO: 6,
            Modality.CAPTION: 48, Modality.METADATA: 48,
        }
        store, records = random_store(rng, n_scenes=20, dims=dims)
        scenes = scene_records(store)
        target = next(r for r in records if r.modality is Modality.CAPTION)
        spec = make_spec(
            queries=[CampaignQuery(
                "dogs",
                QueryEmbeddingBundle(
                    text_vector=target.vector / np.linalg.norm(target.vector)
                ),
            )],
            score_floor=0.0,
        )
        lut = build_context_lut(store, [spec], scenes)
        scene_ids = {e.scene_id for e in lut.entries()}
        assert target.scene_id in scene_ids
        entry = next(e for e in lut.entries() if e.scene_id == target.scene_id)
        assert entry.campaign_ids == ["c1"]
        assert entry.matched_query["c1"] == "dogs"
        # planted scene carries the campaign's best score
        best = max(e.best_score["c1"] for e in lut.entries())
        assert entry.best_score["c1"] == best

    def test_safety_blocked_scene_never_enters(self, rng):
        store, records = random_store(rng, n_scenes=10)
        scenes = scene_records(store)
        scenes[0].hate_flag = True
        spec = make_spec(
            queries=[CampaignQuery(
                "q", QueryEmbeddingBundle(
                    text_vector=unit(rng, store.dimension(Modality.CAPTION))
                ),
            )],
            policy=SafetyPolicy(block_hate=True),
            score_floor=-1e9,
        )
        lut = build_context_lut(store, [spec], scenes)
        assert scenes[0].scene_id not in {e.scene_id for e in lut.entries()}

    def test_infinite_floor_empty_lut(self, rng):
        store, _ = random_store(rng, n_scenes=5)
        spec = make_spec(
            queries=[CampaignQuery(
                "q", QueryEmbeddingBundle(
                    text_vector=unit(rng, store.dimension(Modality.CAPTION))
                ),
            )],
            score_floor=1e18,
        )
        lut = build_context_lut(store, [spec], scene_records(store))
        assert len(lut) == 0

    def test_default_floor_mu_plus_sigma(self, rng):
        store, _ = random_store(rng, n_scenes=30)
        spec = make_spec(
            queries=[CampaignQuery(
                "q", QueryEmbeddingBundle(
                    text_vector=unit(rng, store.dimension(Modality.CAPTION))
                ),
            )],
        )
        lut = build_context_lut(store, [spec], scene_records(store))
        # mean + std floor keeps a minority of scenes
        assert 0 < len(lut) < 30

    def test_max_scenes_cap(self, rng):
        store, _ = random_store(rng, n_scenes=20)
        spec = make_spec(
            queries=[CampaignQuery(
                "q", QueryEmbeddingBundle(
                    text_vector=unit(rng, store.dimension(Modality.CAPTION))
                ),
            )],
            score_floor=-10.0,
            max_scenes=4,
        )
        lut = build_context_lut(store, [spec], scene_records(store))
        assert len(lut) == 4

    def test_rebuild_determinism(self, rng, tmp_path):
        store, _ = random_store(rng, n_scenes=15)
        spec = make_spec(
            queries=[CampaignQuery(
                "q", QueryEmbeddingBundle(
                    text_vector=unit(rng, store.dimension(Modality.CAPTION))
                ),
            )],
            score_floor=0.0,
        )
        scenes = scene_records(store)
        lut_a = build_context_lut(store, [spec], scenes)
        lut_b = build_context_lut(store, [spec], scenes)
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        lut_a.save(a)
        lut_b.save(b)
        assert a.read_bytes() == b.read_bytes()
        assert lut_a.version == lut_b.version


class TestLookup:
    def entry(self, content, scene, start, end):
        return ContextEntry(content, scene, start, end, ["c1"], {"c1": 1.0}, {"c1": "q"})

    def test_interval_membership(self):
        lut = ContextLUT([self.entry("m1", "s1", 120.0, 150.0)], version="v")
        hit = lut.lookup("m1", 130.0)
        assert hit is not None and hit.campaign_ids == ["c1"]

    def test_exclusive_end(self):
        lut = ContextLUT([self.entry("m1", "s1", 120.0, 150.0)], version="v")
        assert lut.lookup("m1", 150.0) is None
        assert lut.lookup("m1", 120.0) is not None

    def test_unknown_content(self):
        lut = ContextLUT([self.entry("m1", "s1", 0.0, 10.0)], version="v")
        assert lut.lookup("m2", 5.0) is None

    def test_gap_between_entries(self):
        lut = ContextLUT(
            [self.entry("m1", "s1", 0.0, 10.0), self.entry("m1", "s2", 20.0, 30.0)],
            version="v",
        )
        assert lut.lookup("m1", 15.0) is None
        assert lut.lookup("m1", 25.0).scene_id == "s2"

    def test_nonfinite_timestamp(self):
        lut = ContextLUT([], version="v")
        with pytest.raises(ValueError):
            lut.lookup("m1", math.nan)

    def test_snapshot_round_trip(self, tmp_path):
        lut = ContextLUT(
            [self.entry("m1", "s1", 0.0, 10.0), self.entry("m2", "s2", 5.0, 9.0)],
            version="deadbeef",
        )
        path = tmp_path / "lut.jsonl"
        lut.save(path)
        loaded = ContextLUT.load(path)
        assert loaded.version == "deadbeef"
        assert len(loaded) == 2
        assert loaded.lookup("m2", 6.0).scene_id == "s2"

    def test_concurrent_lookups_during_swap_see_complete_snapshots(self):
        holder = {"lut": ContextLUT(
            [self.entry("m1", f"s{i}", 10.0 * i, 10.0 * (i + 1)) for i in range(10)],
            version="old",
        )}
        new_lut = ContextLUT(
            [self.entry("m1", f"t{i}", 10.0 * i, 10.0 * (i + 1)) for i in range(10)],
            version="new",
        )
        errors = []

        def reader():
            for _ in range(2000):
                lut = holder["lut"]
                hit = lut.lookup("m1", 42.0)
                if hit is None or hit.scene_id not in ("s4", "t4"):
                    errors.append(hit)
                # scene family must match the snapshot version
                if hit.scene_id.startswith("t") != (lut.version == "new"):
                    errors.append((lut.version, hit.scene_id))

        def swapper():
            holder["lut"] = new_lut

        threads = [threading.Thread(target=reader) for _ in range(4)]
        threads.append(threading.Thread(target=swapper))
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert errors == []
