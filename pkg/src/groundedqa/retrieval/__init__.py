"""Hybrid sparse + dense retrieval with the 200-candidate -> 50-snippet funnel."""

from .bm25 import SparseIndex, bm25_score
from .hnsw import DenseIndex
from .index import (
    IndexHandle,
    RetrievalCandidate,
    RetrievalConfig,
    Snippet,
    build_indexes,
    reciprocal_rank_fuse,
)

__all__ = [
    "SparseIndex",
    "bm25_score",
    "DenseIndex",
    "IndexHandle",
    "RetrievalCandidate",
    "RetrievalConfig",
    "Snippet",
    "build_indexes",
    "reciprocal_rank_fuse",
]
