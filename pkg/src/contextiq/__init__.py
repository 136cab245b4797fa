"""Multimodal expert-based scene retrieval and contextual ad targeting."""

from .store import (
    BuildReport,
    EmbeddingRecord,
    EmbeddingStore,
    Modality,
    StoreBuilder,
    cosine_similarity,
    ingest_embeddings,
    load_embedding_file,
    normalize_vector,
)
from .aggregator import (
    AggregationConfig,
    QueryEmbeddingBundle,
    RetrievalResult,
    SafetyPolicy,
    multimodal_search,
)

__version__ = "0.1.0"

__all__ = [
    "AggregationConfig",
    "BuildReport",
    "EmbeddingRecord",
    "EmbeddingStore",
    "Modality",
    "QueryEmbeddingBundle",
    "RetrievalResult",
    "SafetyPolicy",
    "StoreBuilder",
    "cosine_similarity",
    "ingest_embeddings",
    "load_embedding_file",
    "multimodal_search",
    "normalize_vector",
    "__version__",
]
