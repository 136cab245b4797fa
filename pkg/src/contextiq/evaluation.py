"""Retrieval evaluation: P@K, hit-rate R@K, MAP@K, precision deltas across
a K-grid, and top-K overlap between two runs.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .aggregator import (
    AggregationConfig,
    QueryEmbeddingBundle,
    SafetyPolicy,
    multimodal_search,
)
from .jsonl import read_jsonl
from .store import EmbeddingStore

DEFAULT_K_GRID = (5, 10, 15, 20, 25, 30)


@dataclass
class RelevanceJudgments:
    """Binary relevance per (query_id, scene_id)."""

    relevant: dict[str, set[str]] = field(default_factory=dict)

    def is_relevant(self, query_id: str, scene_id: str) -> bool:
        return scene_id in self.relevant.get(query_id, set())

    def relevant_count(self, query_id: str) -> int:
        return len(self.relevant.get(query_id, set()))

    @classmethod
    def from_binary_file(cls, path: str | Path) -> "RelevanceJudgments":
        """JSON Lines {"query_id", "scene_id", "relevant": 0|1}."""
        judgments = cls()
        for _, obj in read_jsonl(path):
            judgments.relevant.setdefault(obj["query_id"], set())
            if int(obj["relevant"]):
                judgments.relevant[obj["query_id"]].add(obj["scene_id"])
        return judgments

    @classmethod
    def from_concept_files(
        cls, annotations_path: str | Path, concept_map: dict[str, str]
    ) -> "RelevanceJudgments":
        """Concept-style annotations {"scene_id", "concepts": [...]} plus a
        query_id -> concept mapping: a scene is relevant to a query iff the
        query's concept appears in the scene's concept list."""
        scene_concepts: dict[str, set[str]] = {}
        for _, obj in read_jsonl(annotations_path):
            scene_concepts[obj["scene_id"]] = set(obj["concepts"])
        judgments = cls()
        for query_id, concept in concept_map.items():
            judgments.relevant[query_id] = {
                scene_id
                for scene_id, concepts in scene_concepts.items()
                if concept in concepts
            }
        return judgments


# run: query_id -> ordered scene_id list (no duplicates within a query)
RankedRun = dict[str, list[str]]


def _check_k(k: int) -> None:
    if k < 1:
        raise ValueError(f"K must be >= 1, got {k}")


def precision_at_k(run: RankedRun, judgments: RelevanceJudgments, k: int) -> float:
    """Mean over queries of (#relevant in top K) / K. Lists shorter than K
    keep K as the denominator; only retrieved items are counted."""
    _check_k(k)
    if not run:
        return 0.0
    total = 0.0
    for query_id, ranked in run.items():
        hits = sum(
            1 for scene_id in ranked[:k] if judgments.is_relevant(query_id, scene_id)
        )
        total += hits / k
    return total / len(run)


def recall_at_k(run: RankedRun, judgments: RelevanceJudgments, k: int) -> float:
    """Hit-rate: fraction of queries with at least one relevant result in
    the top K. This is not recall of all relevant items."""
    _check_k(k)
    if not run:
        return 0.0
    hits = sum(
        1
        for query_id, ranked in run.items()
        if any(judgments.is_relevant(query_id, s) for s in ranked[:k])
    )
    return hits / len(run)


def average_precision_at_k(
    ranked: Sequence[str],
    relevant: set[str],
    k: int,
    variant: str = "standard_AP",
) -> float:
    """AP@K for one query. standard_AP normalizes the rank-weighted
    precision sum by min(R, K) and scores 0 when R = 0; mean_precision is
    the plain mean of P@1..P@K."""
    _check_k(k)
    hits = 0
    precision_sum = 0.0
    mean_precision_sum = 0.0
    for rank, scene_id in enumerate(ranked[:k], start=1):
        if scene_id in relevant:
            hits += 1
            precision_sum += hits / rank
        mean_precision_sum += hits / rank
    # positions beyond the retrieved list contribute the final running P@k
    for rank in range(len(ranked[:k]) + 1, k + 1):
        mean_precision_sum += hits / rank
    if variant == "mean_precision":
        return mean_precision_sum / k
    if variant != "standard_AP":
        raise ValueError(f"unknown MAP variant: {variant!r}")
    r = len(relevant)
    if r == 0:
        return 0.0
    return precision_sum / min(r, k)


def map_at_k(
    run: RankedRun,
    judgments: RelevanceJudgments,
    k: int,
    variant: str = "standard_AP",
) -> float:
    """Mean over queries of AP@K."""
    _check_k(k)
    if not run:
        return 0.0
    total = sum(
        average_precision_at_k(
            ranked, judgments.relevant.get(query_id, set()), k, variant
        )
        for query_id, ranked in run.items()
    )
    return total / len(run)


def delta_avg(
    precisions_a: dict[int, float], precisions_b: dict[int, float]
) -> float:
    """Mean absolute precision difference over a shared K-grid."""
    if set(precisions_a) != set(precisions_b):
        raise ValueError("precision tables must share the same K set")
    if not precisions_a:
        raise ValueError("empty K set")
    return sum(
        abs(precisions_a[k] - precisions_b[k]) for k in precisions_a
    ) / len(precisions_a)


def topk_overlap(run_a: RankedRun, run_b: RankedRun, k: int) -> float:
    """Mean |top_K(A) ∩ top_K(B)| / K over shared queries, in percent."""
    _check_k(k)
    queries = set(run_a) & set(run_b)
    if not queries:
        return 0.0
    total = sum(
        len(set(run_a[q][:k]) & set(run_b[q][:k])) / k for q in queries
    )
    return 100.0 * total / len(queries)


@dataclass
class MetricReport:
    """Aggregate metrics per K plus a per-query breakdown."""

    ks: list[int]
    metrics: dict[str, dict[int, float]]  # metric name -> {K: value}
    per_query: dict[str, dict[str, float]]
    config_echo: dict = field(default_factory=dict)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "K", "value"])
            for name in sorted(self.metrics):
                for k in self.ks:
                    writer.writerow([name, k, f"{self.metrics[name][k]:.6f}"])

    def write_per_query(self, path: str | Path) -> None:
        from .jsonl import write_jsonl

        write_jsonl(
            path,
            (
                {"query_id": qid, **values}
                for qid, values in sorted(self.per_query.items())
            ),
        )

    def render_table(self) -> str:
        lines = [f"{'metric':<12}" + "".join(f"@{k:<8}" for k in self.ks)]
        for name in sorted(self.metrics):
            row = f"{name:<12}" + "".join(
                f"{self.metrics[name][k]:<9.4f}" for k in self.ks
            )
            lines.append(row)
        return "\n".join(lines)


def run_benchmark(
    store: EmbeddingStore,
    queries: Sequence[tuple[str, QueryEmbeddingBundle]],
    judgments: RelevanceJudgments,
    config: Optional[AggregationConfig] = None,
    policy: Optional[SafetyPolicy] = None,
    tags_by_scene: Optional[dict[str, dict]] = None,
    ks: Sequence[int] = DEFAULT_K_GRID,
    map_variant: str = "standard_AP",
) -> MetricReport:
    """Run the multimodal search for every query and score the ranking."""
    for query_id, relevant in judgments.relevant.items():
        unknown = relevant - store.scene_ids
        if unknown:
            raise ValueError(
                f"judgments for query {query_id!r} reference unknown "
                f"scenes: {sorted(unknown)[:5]}"
            )
    run: RankedRun = {}
    search_config = config or AggregationConfig(top_k=max(ks, default=10))
    for query_id, bundle in queries:
        result = multimodal_search(
            bundle, store, search_config, policy, tags_by_scene
        )
        run[query_id] = [hit.scene_id for hit in result.hits]
    metrics: dict[str, dict[int, float]] = {
        "precision": {k: precision_at_k(run, judgments, k) for k in ks},
        "recall": {k: recall_at_k(run, judgments, k) for k in ks},
        "map": {k: map_at_k(run, judgments, k, map_variant) for k in ks},
    }
    per_query = {
        query_id: {
            "first_relevant_rank": next(
                (
                    rank
                    for rank, s in enumerate(ranked, start=1)
                    if judgments.is_relevant(query_id, s)
                ),
                -1,
            ),
            "retrieved": len(ranked),
            "relevant_total": judgments.relevant_count(query_id),
        }
        for query_id, ranked in run.items()
    }
    echo = {}
    if config is not None:
        echo = {
            "weights": {m.value: w for m, w in search_config.weights.items()},
            "thresholds": {m.value: t for m, t in search_config.thresholds.items()},
            "top_k": search_config.top_k,
        }
    return MetricReport(
        ks=list(ks), metrics=metrics, per_query=per_query, config_echo=echo
    )
