"""Hybrid index handle: both retrieval legs, RRF fusion, and the rerank funnel.

The funnel mirrors the production pipeline: each leg contributes its top
`n_candidates`, the union is fused with reciprocal-rank fusion
(fused = sum over legs of 1/(C + rank), C = 60), the fused top `n_candidates`
go to the reranker, and the best `top_snippets` survive as citable snippets.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..errors import IndexBuildError, ProviderError
from ..ingest import Chunk, ChunkStore, write_chunk_store
from ..text import index_terms
from .bm25 import SparseIndex
from .hnsw import DenseIndex

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


@dataclass(frozen=True)
class RetrievalConfig:
    embed_dim: int = 64
    M: int = 16
    ef_construction: int = 200
    ef_search: int = 100
    k1: float = 1.2
    b: float = 0.75
    rrf_c: int = 60
    n_candidates: int = 200
    top_snippets: int = 50
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "embed_dim": self.embed_dim,
            "M": self.M,
            "ef_construction": self.ef_construction,
            "ef_search": self.ef_search,
            "k1": self.k1,
            "b": self.b,
            "rrf_c": self.rrf_c,
            "n_candidates": self.n_candidates,
            "top_snippets": self.top_snippets,
            "seed": self.seed,
        }


@dataclass
class RetrievalCandidate:
    chunk_id: str
    sparse_score: float = 0.0
    dense_score: float = 0.0
    fused_score: float = 0.0
    rerank_score: float | None = None
    rank: int = 0


@dataclass
class Snippet:
    """A citable chunk reference carrying text plus provenance."""

    chunk_id: str
    doc_id: str
    seq: int
    text: str
    start_char: int
    end_char: int
    score: float = 0.0
    fused_score: float = 0.0
    source_uri: str = ""
    external: bool = False

    def to_dict(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "doc_id": self.doc_id,
            "seq": self.seq,
            "text": self.text,
            "start_char": self.start_char,
            "end_char": self.end_char,
            "score": self.score,
            "fused_score": self.fused_score,
            "source_uri": self.source_uri,
            "external": self.external,
        }

    @classmethod
    def from_dict(cls, rec: Mapping) -> "Snippet":
        return cls(**dict(rec))


def reciprocal_rank_fuse(
    leg_rankings: Sequence[Sequence[str]], c: int = 60
) -> dict[str, float]:
    """fused(id) = sum over legs of 1/(c + rank), rank starting at 1."""
    fused: dict[str, float] = {}
    for ranking in leg_rankings:
        for rank, chunk_id in enumerate(ranking, start=1):
            fused[chunk_id] = fused.get(chunk_id, 0.0) + 1.0 / (c + rank)
    return fused


class IndexHandle:
    """Immutable hybrid index over one chunk store.

    Built once via :func:`build_indexes`; afterwards it is safe to share
    across any number of concurrent query workers.
    """

    def __init__(
        self,
        store: ChunkStore,
        sparse: SparseIndex,
        dense: DenseIndex,
        embedder,
        config: RetrievalConfig,
        doc_uris: Mapping[str, str] | None = None,
    ):
        self.store = store
        self.sparse = sparse
        self.dense = dense
        self.embedder = embedder
        self.config = config
        self.doc_uris = dict(doc_uris or {})

    def __len__(self) -> int:
        return len(self.store)

    # -- single legs ---------------------------------------------------------

    def search_sparse(self, query: str, k: int) -> list[RetrievalCandidate]:
        ranked = self.sparse.search(index_terms(query), k)
        return [
            RetrievalCandidate(chunk_id=cid, sparse_score=score, rank=i + 1)
            for i, (cid, score) in enumerate(ranked)
        ]

    def search_dense(self, query_vector: Sequence[float], k: int) -> list[RetrievalCandidate]:
        ranked = self.dense.search(query_vector, k)
        return [
            RetrievalCandidate(chunk_id=cid, dense_score=score, rank=i + 1)
            for i, (cid, score) in enumerate(ranked)
        ]

    # -- funnel ---------------------------------------------------------------

    def hybrid_retrieve(self, query: str, n_candidates: int | None = None) -> list[RetrievalCandidate]:
        n = n_candidates if n_candidates is not None else self.config.n_candidates
        if n < 1:
            raise ValueError(f"n_candidates must be >= 1, got {n}")
        # Each leg always contributes its top config.n_candidates (the funnel
        # constant); n only truncates the fused list, so top-k stays a prefix
        # of top-(k+1).
        leg_depth = max(self.config.n_candidates, n)
        query_terms = index_terms(query)
        query_vec = self.embedder.embed([query])[0]
        sparse_leg = self.sparse.search(query_terms, leg_depth)
        dense_leg = self.dense.search(query_vec, leg_depth)
        fused = reciprocal_rank_fuse(
            [[cid for cid, _ in sparse_leg], [cid for cid, _ in dense_leg]],
            c=self.config.rrf_c,
        )
        dense_scores = dict(dense_leg)
        ranked = sorted(fused.items(), key=lambda kv: (-kv[1], kv[0]))[:n]
        out = []
        for i, (cid, fused_score) in enumerate(ranked):
            dense_score = dense_scores.get(cid)
            if dense_score is None:
                dense_score = float(self.dense.vector(cid) @ np.asarray(query_vec, dtype=np.float64))
            out.append(
                RetrievalCandidate(
                    chunk_id=cid,
                    sparse_score=self.sparse.score(query_terms, cid),
                    dense_score=dense_score,
                    fused_score=fused_score,
                    rank=i + 1,
                )
            )
        return out

    def rerank_and_select(
        self,
        query: str,
        candidates: Sequence[RetrievalCandidate],
        reranker,
        top_n: int | None = None,
    ) -> list[Snippet]:
        """Score every candidate with the reranker and keep the best ``top_n``.

        A reranker failure degrades to fused order with a logged warning
        rather than failing the query.
        """
        top_n = top_n if top_n is not None else self.config.top_snippets
        if not candidates:
            return []
        passages = [self.store.get(c.chunk_id).text for c in candidates]
        fused = [c.fused_score for c in candidates]
        try:
            scores = reranker.rerank(query, passages, fused=fused)
            if len(scores) != len(candidates):
                raise ProviderError(
                    f"reranker returned {len(scores)} scores for {len(candidates)} passages"
                )
        except ProviderError as exc:
            logger.warning("reranker failed (%s); falling back to fused order", exc)
            scores = fused
        order = sorted(
            zip(candidates, scores), key=lambda pair: (-pair[1], pair[0].chunk_id)
        )[:top_n]
        snippets = []
        for cand, score in order:
            chunk = self.store.get(cand.chunk_id)
            snippets.append(
                Snippet(
                    chunk_id=chunk.chunk_id,
                    doc_id=chunk.doc_id,
                    seq=chunk.seq,
                    text=chunk.text,
                    start_char=chunk.start_char,
                    end_char=chunk.end_char,
                    score=float(score),
                    fused_score=cand.fused_score,
                    source_uri=self.doc_uris.get(chunk.doc_id, ""),
                )
            )
        return snippets

    def retrieve_snippets(self, query: str, reranker) -> list[Snippet]:
        """The full funnel: hybrid candidates -> rerank -> top snippets."""
        return self.rerank_and_select(query, self.hybrid_retrieve(query), reranker)

    # -- persistence -----------------------------------------------------------

    def manifest(self, window_tokens: int | None = None, overlap_tokens: int | None = None) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "chunk_count": len(self.store),
            "window_tokens": window_tokens,
            "overlap_tokens": overlap_tokens,
            "config": self.config.to_dict(),
        }

    def save(self, directory: str, window_tokens: int | None = None, overlap_tokens: int | None = None) -> None:
        os.makedirs(directory, exist_ok=True)
        write_chunk_store(list(self.store), os.path.join(directory, "chunks.jsonl"))
        np.save(os.path.join(directory, "dense_vectors.npy"), self.dense.vectors)
        with open(os.path.join(directory, "dense_graph.json"), "w", encoding="utf-8") as fh:
            json.dump(self.dense.to_graph_dict(), fh)
        with open(os.path.join(directory, "doc_uris.json"), "w", encoding="utf-8") as fh:
            json.dump(self.doc_uris, fh, ensure_ascii=False, sort_keys=True)
        with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(self.manifest(window_tokens, overlap_tokens), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, directory: str, embedder) -> "IndexHandle":
        with open(os.path.join(directory, "manifest.json"), encoding="utf-8") as fh:
            manifest = json.load(fh)
        if manifest.get("format_version") != FORMAT_VERSION:
            raise IndexBuildError(
                f"unsupported index format {manifest.get('format_version')!r}"
            )
        config = RetrievalConfig(**manifest["config"])
        store = ChunkStore.load(os.path.join(directory, "chunks.jsonl"))
        vectors = np.load(os.path.join(directory, "dense_vectors.npy"))
        with open(os.path.join(directory, "dense_graph.json"), encoding="utf-8") as fh:
            graph = json.load(fh)
        dense = DenseIndex.from_graph_dict(graph, vectors)
        sparse = SparseIndex.build(list(store), k1=config.k1, b=config.b)
        doc_uris = {}
        uri_path = os.path.join(directory, "doc_uris.json")
        if os.path.exists(uri_path):
            with open(uri_path, encoding="utf-8") as fh:
                doc_uris = json.load(fh)
        return cls(store, sparse, dense, embedder, config, doc_uris)


def build_indexes(
    chunk_store: ChunkStore,
    embedder,
    config: RetrievalConfig | None = None,
    doc_uris: Mapping[str, str] | None = None,
) -> IndexHandle:
    """Index every chunk in both legs; the handle is immutable afterwards."""
    config = config or RetrievalConfig()
    chunks: list[Chunk] = list(chunk_store)
    if not chunks:
        raise IndexBuildError("cannot build indexes over an empty chunk store")
    vectors = embedder.embed([c.text for c in chunks])
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.shape != (len(chunks), config.embed_dim):
        raise IndexBuildError(
            f"embedder returned shape {vectors.shape}, expected "
            f"({len(chunks)}, {config.embed_dim})"
        )
    dense = DenseIndex(
        dim=config.embed_dim,
        M=config.M,
        ef_construction=config.ef_construction,
        ef_search=config.ef_search,
        seed=config.seed,
    )
    for chunk, vec in zip(chunks, vectors):
        dense.add(chunk.chunk_id, vec)
    sparse = SparseIndex.build(chunks, k1=config.k1, b=config.b)
    return IndexHandle(chunk_store, sparse, dense, embedder, config, doc_uris)
