"""Navigable small-world graph index for approximate cosine search.

Vectors are L2-normalized at insert so cosine similarity reduces to a dot
product; internally the index works with distance = 1 - cosine. Levels are
drawn from a seeded RNG and inserts happen in store order, which makes builds
(and therefore every query result) reproducible.

Neighbor selection uses the diversity heuristic (keep a candidate only if it
is closer to the query than to any already-selected neighbor, then backfill
from the pruned pool), which keeps recall high on clustered data.
"""

from __future__ import annotations

import heapq
import math
import random
from typing import Sequence

import numpy as np


class DenseIndex:
    def __init__(
        self,
        dim: int,
        M: int = 16,
        ef_construction: int = 200,
        ef_search: int = 100,
        seed: int = 0,
    ):
        self.dim = dim
        self.M = M
        self.M0 = 2 * M
        self.ef_construction = ef_construction
        self.ef_search = ef_search
        self.seed = seed
        self._ml = 1.0 / math.log(M)
        self._rng = random.Random(seed)

        self._ids: list[str] = []
        self._id_to_idx: dict[str, int] = {}
        self._capacity = 1024
        self._vecs = np.zeros((self._capacity, dim), dtype=np.float32)
        self._levels: list[int] = []
        # node -> level -> list of neighbor indexes
        self._neighbors: list[list[list[int]]] = []
        self._entry = -1
        self._max_level = -1
        # Stamped visited marks, reused across searches to avoid reallocation.
        self._visited: list[int] = [0] * self._capacity
        self._stamp = 0

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in self._id_to_idx

    @property
    def ids(self) -> list[str]:
        return list(self._ids)

    def vector(self, chunk_id: str) -> np.ndarray:
        return self._vecs[self._id_to_idx[chunk_id]].astype(np.float64)

    @staticmethod
    def _normalize(vector: Sequence[float]) -> np.ndarray:
        v = np.asarray(vector, dtype=np.float32)
        norm = float(np.linalg.norm(v))
        return v / norm if norm > 0.0 else v

    def _grow(self, needed: int) -> None:
        if needed <= self._capacity:
            return
        new_cap = max(self._capacity * 2, needed)
        grown = np.zeros((new_cap, self.dim), dtype=np.float32)
        grown[: len(self._ids)] = self._vecs[: len(self._ids)]
        self._vecs = grown
        self._visited.extend([0] * (new_cap - self._capacity))
        self._capacity = new_cap

    def _dist(self, query: np.ndarray, idxs: Sequence[int]) -> np.ndarray:
        return 1.0 - self._vecs[idxs] @ query

    def _search_layer(
        self, query: np.ndarray, entry_points: list[int], layer: int, ef: int
    ) -> list[tuple[float, int]]:
        """Best-first expansion at one layer; returns (distance, idx) ascending."""
        self._stamp += 1
        stamp = self._stamp
        visited = self._visited
        for i in entry_points:
            visited[i] = stamp
        dists = self._dist(query, entry_points)
        candidates = [(float(d), i) for d, i in zip(dists, entry_points)]
        heapq.heapify(candidates)
        best = [(-d, i) for d, i in candidates]
        heapq.heapify(best)
        while len(best) > ef:
            heapq.heappop(best)

        while candidates:
            dist, node = heapq.heappop(candidates)
            if len(best) >= ef and dist > -best[0][0]:
                break
            fresh = [n for n in self._neighbors[node][layer] if visited[n] != stamp]
            if not fresh:
                continue
            for n in fresh:
                visited[n] = stamp
            for n, d in zip(fresh, self._dist(query, fresh)):
                d = float(d)
                if len(best) < ef:
                    heapq.heappush(candidates, (d, n))
                    heapq.heappush(best, (-d, n))
                elif d < -best[0][0]:
                    heapq.heappush(candidates, (d, n))
                    heapq.heapreplace(best, (-d, n))
        return sorted((-d, i) for d, i in best)

    def _select_neighbors(self, candidates: list[tuple[float, int]], m: int) -> list[int]:
        """Diversity-aware pruning with backfill from the discarded pool.

        A candidate survives only if it is closer to the query than to every
        already-selected neighbor; the min-distance-to-selected array is
        updated incrementally so each selection costs one mat-vec product.
        """
        if len(candidates) <= m:
            return [i for _, i in candidates]
        idxs = [i for _, i in candidates]
        sub = self._vecs[idxs]
        n = len(idxs)
        min_to_selected = np.full(n, np.inf, dtype=np.float32)
        selected: list[int] = []
        discarded: list[int] = []
        for pos in range(n):
            if len(selected) >= m:
                break
            if selected and candidates[pos][0] >= min_to_selected[pos]:
                discarded.append(pos)
                continue
            selected.append(pos)
            np.minimum(min_to_selected, 1.0 - sub @ sub[pos], out=min_to_selected)
        for pos in discarded:
            if len(selected) >= m:
                break
            selected.append(pos)
        return [idxs[p] for p in selected]

    def _shrink(self, node: int, layer: int, m: int) -> None:
        """Re-prune an overflowing neighbor list down to m diverse links.

        Runs the diversity heuristic, but only once the list has outgrown m by
        a slack margin so the cost is amortized over many backlink additions;
        the extra temporary links only help search.
        """
        links = self._neighbors[node][layer]
        if len(links) <= m + max(4, m // 2):
            return
        dists = 1.0 - self._vecs[links] @ self._vecs[node]
        ranked = sorted(zip((float(d) for d in dists), links))
        self._neighbors[node][layer] = self._select_neighbors(ranked, m)

    def add(self, chunk_id: str, vector: Sequence[float]) -> None:
        if chunk_id in self._id_to_idx:
            raise ValueError(f"chunk {chunk_id!r} already indexed")
        vec = self._normalize(vector)
        if vec.shape != (self.dim,):
            raise ValueError(f"expected dimension {self.dim}, got {vec.shape}")
        idx = len(self._ids)
        self._grow(idx + 1)
        self._vecs[idx] = vec
        self._ids.append(chunk_id)
        self._id_to_idx[chunk_id] = idx
        level = int(-math.log(1.0 - self._rng.random()) * self._ml)
        self._levels.append(level)
        self._neighbors.append([[] for _ in range(level + 1)])

        if self._entry == -1:
            self._entry = idx
            self._max_level = level
            return

        query = vec
        entry_points = [self._entry]
        for layer in range(self._max_level, level, -1):
            found = self._search_layer(query, entry_points, layer, 1)
            entry_points = [found[0][1]]

        for layer in range(min(level, self._max_level), -1, -1):
            candidates = self._search_layer(query, entry_points, layer, self.ef_construction)
            m = self.M0 if layer == 0 else self.M
            chosen = self._select_neighbors(candidates, m)
            self._neighbors[idx][layer] = list(chosen)
            for n in chosen:
                self._neighbors[n][layer].append(idx)
                self._shrink(n, layer, m)
            entry_points = [i for _, i in candidates]

        if level > self._max_level:
            self._entry = idx
            self._max_level = level

    def search(self, query_vector: Sequence[float], k: int, ef: int | None = None) -> list[tuple[str, float]]:
        """Top-k (chunk_id, cosine) pairs, ties broken by chunk_id ascending."""
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        if not self._ids:
            return []
        ef = max(ef if ef is not None else self.ef_search, k)
        query = self._normalize(query_vector)
        entry_points = [self._entry]
        for layer in range(self._max_level, 0, -1):
            found = self._search_layer(query, entry_points, layer, 1)
            entry_points = [found[0][1]]
        found = self._search_layer(query, entry_points, 0, ef)
        scored = [(dist, self._ids[idx]) for dist, idx in found]
        scored.sort(key=lambda t: (t[0], t[1]))
        return [(cid, 1.0 - dist) for dist, cid in scored[:k]]

    def exhaustive_search(self, query_vector: Sequence[float], k: int) -> list[tuple[str, float]]:
        """Brute-force scan over every vector; the recall oracle for `search`."""
        if not self._ids:
            return []
        query = self._normalize(query_vector).astype(np.float64)
        sims = self._vecs[: len(self._ids)] @ query
        scored = sorted(zip(sims, self._ids), key=lambda t: (-t[0], t[1]))
        return [(cid, float(sim)) for sim, cid in scored[:k]]

    # -- persistence -------------------------------------------------------

    def to_graph_dict(self) -> dict:
        return {
            "dim": self.dim,
            "M": self.M,
            "ef_construction": self.ef_construction,
            "ef_search": self.ef_search,
            "seed": self.seed,
            "ids": self._ids,
            "levels": self._levels,
            "neighbors": self._neighbors,
            "entry": self._entry,
            "max_level": self._max_level,
        }

    @classmethod
    def from_graph_dict(cls, graph: dict, vectors: np.ndarray) -> "DenseIndex":
        index = cls(
            dim=graph["dim"],
            M=graph["M"],
            ef_construction=graph["ef_construction"],
            ef_search=graph["ef_search"],
            seed=graph["seed"],
        )
        n = len(graph["ids"])
        if vectors.shape != (n, graph["dim"]):
            raise ValueError(f"vector matrix shape {vectors.shape} does not match graph")
        index._ids = list(graph["ids"])
        index._id_to_idx = {cid: i for i, cid in enumerate(index._ids)}
        index._capacity = max(n, 1)
        index._vecs = np.ascontiguousarray(vectors, dtype=np.float32)
        index._levels = [int(l) for l in graph["levels"]]
        index._neighbors = [[list(map(int, lvl)) for lvl in node] for node in graph["neighbors"]]
        index._entry = int(graph["entry"])
        index._max_level = int(graph["max_level"])
        return index

    @property
    def vectors(self) -> np.ndarray:
        return self._vecs[: len(self._ids)]
