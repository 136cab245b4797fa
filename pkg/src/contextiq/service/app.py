"""FastAPI service exposing search, campaign registration, LUT builds and
context lookups over a sealed embedding store.

The LUT reference is swapped atomically on rebuild, so concurrent lookups
always observe one complete snapshot.
"""
from __future__ import annotations

import threading
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException, Response

from ..adservice import (
    CampaignRegistry,
    CampaignSpec,
    ContextLUT,
    InvalidCampaignError,
    build_context_lut,
)
from ..aggregator import (
    AggregationConfig,
    QueryEmbeddingBundle,
    SafetyPolicy,
    multimodal_search,
)
from ..jsonl import read_jsonl
from ..pipeline import SceneRecord
from ..store import EmbeddingStore, Modality, load_embedding_file
from .schemas import (
    CampaignIn,
    CampaignOut,
    ConfigIn,
    ContextOut,
    EmbeddingsIn,
    HealthOut,
    HitOut,
    LutBuildResponse,
    PolicyIn,
    RemovedOut,
    SearchRequest,
    SearchResponse,
)


class ServiceState:
    """Mutable service-side state around the immutable store and LUT."""

    def __init__(
        self,
        store: EmbeddingStore,
        scenes: list[SceneRecord],
        lut: Optional[ContextLUT] = None,
    ):
        self.store = store
        self.scenes = scenes
        self.registry = CampaignRegistry()
        self.lut = lut
        self._build_lock = threading.Lock()

    @property
    def tags_by_scene(self) -> dict[str, dict]:
        return {
            s.scene_id: {
                "emotions": list(s.emotions),
                "profanity_flag": s.profanity_flag,
                "hate_flag": s.hate_flag,
            }
            for s in self.scenes
        }

    def rebuild_lut(self, snapshot_path: Optional[Path] = None) -> ContextLUT:
        with self._build_lock:
            lut = build_context_lut(self.store, self.registry.all(), self.scenes)
            if snapshot_path is not None:
                lut.save(snapshot_path)
            self.lut = lut  # atomic reference swap
            return lut


def _bundle_from(emb: EmbeddingsIn, text: str) -> QueryEmbeddingBundle:
    def vec(v):
        return None if v is None else np.asarray(v, dtype=np.float64)

    return QueryEmbeddingBundle(
        text=text,
        vision=vec(emb.vision),
        audio=vec(emb.audio),
        text_vector=vec(emb.text),
    )


def _config_from(cfg: Optional[ConfigIn]) -> AggregationConfig:
    if cfg is None:
        return AggregationConfig()
    return AggregationConfig(
        weights={Modality(k): v for k, v in cfg.weights.items()},
        thresholds={Modality(k): v for k, v in cfg.thresholds.items()},
        top_k=cfg.top_k,
        filter_before_truncation=cfg.filter_before_truncation,
    )


def _policy_from(pol: Optional[PolicyIn]) -> SafetyPolicy:
    if pol is None:
        return SafetyPolicy()
    return SafetyPolicy(
        blocked_emotions=set(pol.blocked_emotions),
        block_profanity=pol.block_profanity,
        block_hate=pol.block_hate,
        strict_untagged=pol.untagged != "lenient",
    )


def create_app(state: ServiceState, snapshot_path: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="contextiq", version="0.1.0")
    app.state.service = state

    @app.post("/search", response_model=SearchResponse)
    def search(request: SearchRequest) -> SearchResponse:
        try:
            result = multimodal_search(
                _bundle_from(request.embeddings, request.text),
                state.store,
                _config_from(request.config),
                _policy_from(request.policy),
                state.tags_by_scene,
            )
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return SearchResponse(
            hits=[HitOut(**h.to_dict()) for h in result.hits],
            removed=[RemovedOut(scene_id=s, reason=r) for s, r in result.removed],
        )

    @app.post("/campaigns", response_model=CampaignOut)
    def register_campaign(campaign: CampaignIn) -> CampaignOut:
        spec = CampaignSpec(
            campaign_id=campaign.campaign_id,
            queries=[
                _campaign_query(q.text, q.embeddings) for q in campaign.queries
            ],
            config=_config_from(campaign.config),
            policy=_policy_from(campaign.policy),
            score_floor=campaign.score_floor,
            max_scenes=campaign.max_scenes,
        )
        try:
            version, digest = state.registry.register(spec)
        except InvalidCampaignError as exc:
            raise HTTPException(status_code=422, detail=exc.errors)
        return CampaignOut(
            campaign_id=spec.campaign_id, version=version, spec_hash=digest
        )

    @app.get("/campaigns/{campaign_id}")
    def get_campaign(campaign_id: str) -> dict:
        entry = state.registry.get(campaign_id)
        if entry is None:
            raise HTTPException(status_code=404, detail="unknown campaign")
        spec, version = entry
        return {"version": version, **spec.canonical_dict()}

    @app.post("/lut/build", response_model=LutBuildResponse)
    def build_lut() -> LutBuildResponse:
        lut = state.rebuild_lut(snapshot_path)
        return LutBuildResponse(lut_version=lut.version, entry_count=len(lut))

    @app.get("/context")
    def context(content_id: str, t: float):
        if state.lut is None:
            raise HTTPException(status_code=409, detail="LUT not built yet")
        entry = state.lut.lookup(content_id, t)
        if entry is None:
            return Response(status_code=204)
        return ContextOut(**entry.to_dict())

    @app.get("/healthz", response_model=HealthOut)
    def healthz() -> HealthOut:
        return HealthOut(
            status="ok",
            scene_count=len(state.store.scene_ids),
            lut_version=None if state.lut is None else state.lut.version,
            lut_entries=0 if state.lut is None else len(state.lut),
        )

    return app


def _campaign_query(text: str, emb: EmbeddingsIn):
    from ..adservice import CampaignQuery

    return CampaignQuery(text=text, bundle=_bundle_from(emb, text))


def load_state(store_dir: str | Path, lut_path: Optional[str | Path] = None) -> ServiceState:
    """Load a store directory (embeddings.jsonl + scenes.jsonl) and an
    optional LUT snapshot produced by an earlier build."""
    store_dir = Path(store_dir)
    store, _report = load_embedding_file(store_dir / "embeddings.jsonl")
    scenes_path = store_dir / "scenes.jsonl"
    scenes = []
    if scenes_path.exists():
        scenes = [SceneRecord.from_dict(obj) for _, obj in read_jsonl(scenes_path)]
    lut = None
    if lut_path is not None and Path(lut_path).exists():
        lut = ContextLUT.load(lut_path)
    return ServiceState(store=store, scenes=scenes, lut=lut)
