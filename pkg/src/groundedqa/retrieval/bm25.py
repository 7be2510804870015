"""Okapi BM25 over an inverted index of chunk terms.

Scores follow the standard form

    score(q, c) = sum over t in q of IDF(t) * tf*(k1+1) / (tf + k1*(1 - b + b*dl/avgdl))

with IDF(t) = ln(1 + (N - n_t + 0.5) / (n_t + 0.5)). Duplicate query terms
contribute once per occurrence. Absent terms contribute 0, so scores are
always non-negative.
"""

from __future__ import annotations

import math
from typing import Sequence

from ..ingest import Chunk
from ..text import index_terms


class SparseIndex:
    def __init__(self, k1: float = 1.2, b: float = 0.75):
        if k1 <= 0:
            raise ValueError(f"k1 must be > 0, got {k1}")
        if not 0.0 <= b <= 1.0:
            raise ValueError(f"b must be in [0, 1], got {b}")
        self.k1 = k1
        self.b = b
        # term -> {chunk_id: term frequency}
        self._postings: dict[str, dict[str, int]] = {}
        self.doc_lengths: dict[str, int] = {}
        self.avg_doc_length = 0.0
        self._all_ids: list[str] = []

    @classmethod
    def build(cls, chunks: Sequence[Chunk], k1: float = 1.2, b: float = 0.75) -> "SparseIndex":
        index = cls(k1=k1, b=b)
        for chunk in chunks:
            terms = index_terms(chunk.text)
            index.doc_lengths[chunk.chunk_id] = len(terms)
            counts: dict[str, int] = {}
            for t in terms:
                counts[t] = counts.get(t, 0) + 1
            for t, tf in counts.items():
                index._postings.setdefault(t, {})[chunk.chunk_id] = tf
        n = len(index.doc_lengths)
        index.avg_doc_length = sum(index.doc_lengths.values()) / n if n else 0.0
        index._all_ids = sorted(index.doc_lengths)
        return index

    def __len__(self) -> int:
        return len(self.doc_lengths)

    def postings(self, term: str) -> list[tuple[str, int]]:
        """Posting list for a term, sorted by chunk_id."""
        return sorted(self._postings.get(term, {}).items())

    def idf(self, term: str) -> float:
        n_t = len(self._postings.get(term, {}))
        n = len(self.doc_lengths)
        return math.log(1.0 + (n - n_t + 0.5) / (n_t + 0.5))

    def score(self, query_terms: Sequence[str], chunk_id: str) -> float:
        if chunk_id not in self.doc_lengths:
            raise KeyError(f"chunk {chunk_id!r} not in index")
        if self.avg_doc_length == 0.0:
            return 0.0
        dl = self.doc_lengths[chunk_id]
        norm = self.k1 * (1.0 - self.b + self.b * dl / self.avg_doc_length)
        total = 0.0
        for term in query_terms:
            tf = self._postings.get(term, {}).get(chunk_id, 0)
            if tf == 0:
                continue
            total += self.idf(term) * tf * (self.k1 + 1.0) / (tf + norm)
        return total

    def search(self, query_terms: Sequence[str], k: int) -> list[tuple[str, float]]:
        """Top-k chunks by BM25 score, ties broken by chunk_id ascending.

        Chunks that match no query term score 0 and are used to pad the result
        when fewer than k chunks matched; asking for more than the corpus has
        returns everything.
        """
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        scores: dict[str, float] = {}
        for term in set(query_terms):
            for chunk_id in self._postings.get(term, {}):
                scores.setdefault(chunk_id, 0.0)
        for chunk_id in scores:
            scores[chunk_id] = self.score(query_terms, chunk_id)
        ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        if len(ranked) < k:
            matched = set(scores)
            for chunk_id in self._all_ids:
                if len(ranked) >= k:
                    break
                if chunk_id not in matched:
                    ranked.append((chunk_id, 0.0))
        return ranked[:k]


def bm25_score(query_terms: Sequence[str], chunk_id: str, index: SparseIndex) -> float:
    """Okapi score of one chunk for a term sequence (duplicates count twice)."""
    return index.score(query_terms, chunk_id)
