"""Pydantic request/response models for the HTTP service."""
from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class EmbeddingsIn(BaseModel):
    vision: Optional[list[float]] = None
    audio: Optional[list[float]] = None
    text: Optional[list[float]] = None


class ConfigIn(BaseModel):
    weights: dict[str, float] = Field(default_factory=dict)
    thresholds: dict[str, float] = Field(default_factory=dict)
    top_k: int = 10
    filter_before_truncation: bool = False


class PolicyIn(BaseModel):
    blocked_emotions: list[str] = Field(default_factory=list)
    block_profanity: bool = False
    block_hate: bool = False
    untagged: str = "strict"


class SearchRequest(BaseModel):
    text: str = ""
    embeddings: EmbeddingsIn = Field(default_factory=EmbeddingsIn)
    config: Optional[ConfigIn] = None
    policy: Optional[PolicyIn] = None


class HitOut(BaseModel):
    scene_id: str
    score: float
    modality: str
    raw_scores: dict[str, float]


class RemovedOut(BaseModel):
    scene_id: str
    reason: str


class SearchResponse(BaseModel):
    hits: list[HitOut]
    removed: list[RemovedOut]


class CampaignQueryIn(BaseModel):
    text: str = ""
    embeddings: EmbeddingsIn = Field(default_factory=EmbeddingsIn)


class CampaignIn(BaseModel):
    campaign_id: str
    queries: list[CampaignQueryIn]
    config: Optional[ConfigIn] = None
    policy: Optional[PolicyIn] = None
    score_floor: Optional[float] = None
    max_scenes: Optional[int] = None


class CampaignOut(BaseModel):
    campaign_id: str
    version: int
    spec_hash: str


class LutBuildResponse(BaseModel):
    lut_version: str
    entry_count: int


class ContextOut(BaseModel):
    content_id: str
    scene_id: str
    start_s: float
    end_s: float
    campaign_ids: list[str]
    best_score: dict[str, float]
    matched_query: dict[str, str]


class HealthOut(BaseModel):
    status: str
    scene_count: int
    lut_version: Optional[str] = None
    lut_entries: int = 0
