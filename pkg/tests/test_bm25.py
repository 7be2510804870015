"""BM25 scoring against an independent brute-force evaluation of the formula."""

from __future__ import annotations

import math
import random

import pytest

from groundedqa.retrieval.bm25 import SparseIndex, bm25_score
from groundedqa.text import index_terms

from conftest import make_chunks


def okapi_oracle(query_terms, texts, target_idx, k1=1.2, b=0.75):
    """Direct evaluation of the Okapi formula from raw texts (no index)."""
    term_lists = [index_terms(t) for t in texts]
    n_docs = len(texts)
    lengths = [len(tl) for tl in term_lists]
    avgdl = sum(lengths) / n_docs
    if avgdl == 0:
        return 0.0
    score = 0.0
    for term in query_terms:
        n_t = sum(1 for tl in term_lists if term in tl)
        idf = math.log(1 + (n_docs - n_t + 0.5) / (n_t + 0.5))
        tf = term_lists[target_idx].count(term)
        if tf:
            score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * lengths[target_idx] / avgdl))
    return score


TOY_TEXTS = [
    "the shipment is pending review by the customs office",
    "all invoices were settled on time this quarter",
    "review of shipping routes continues with the office",
]


class TestBm25Score:
    def test_absent_terms_contribute_zero(self):
        index = SparseIndex.build(make_chunks(TOY_TEXTS))
        assert bm25_score(["zebra"], "c000", index) == 0.0
        assert bm25_score(["zebra", "xylophone"], "c001", index) == 0.0

    def test_toy_corpus_matches_hand_evaluated_formula(self):
        # 'pending' occurs once, in chunk c000 only (n_t = 1, N = 3).
        index = SparseIndex.build(make_chunks(TOY_TEXTS))
        got = bm25_score(["pending"], "c000", index)
        expected = okapi_oracle(["pending"], TOY_TEXTS, 0)
        assert got == pytest.approx(expected, rel=1e-12)
        assert got > 0.0

    def test_duplicate_query_terms_count_twice(self):
        index = SparseIndex.build(make_chunks(TOY_TEXTS))
        assert bm25_score(["review", "review"], "c002", index) == pytest.approx(
            2 * bm25_score(["review"], "c002", index), rel=1e-12
        )

    def test_unknown_chunk_raises(self):
        index = SparseIndex.build(make_chunks(TOY_TEXTS))
        with pytest.raises(KeyError):
            bm25_score(["a"], "nope", index)

    def test_scores_non_negative(self):
        index = SparseIndex.build(make_chunks(TOY_TEXTS))
        for cid in ("c000", "c001", "c002"):
            assert bm25_score(["the", "office", "review"], cid, index) >= 0.0


def test_oracle_equivalence_random_corpora():
    """Index scores equal brute force within 1e-9 relative on small corpora."""
    rng = random.Random(11)
    vocab = [f"w{i}" for i in range(40)]
    for _ in range(25):
        n = rng.randint(1, 50)
        texts = [" ".join(rng.choices(vocab, k=rng.randint(1, 30))) for _ in range(n)]
        index = SparseIndex.build(make_chunks(texts))
        query = rng.choices(vocab, k=rng.randint(1, 6))
        for i in range(n):
            got = bm25_score(query, f"c{i:03d}", index)
            want = okapi_oracle(query, texts, i)
            assert got == pytest.approx(want, rel=1e-9, abs=1e-12)


class TestSparseSearch:
    def test_singleton_corpus_any_query(self):
        index = SparseIndex.build(make_chunks(["only one chunk here"]))
        assert index.search(["unrelated"], 1)[0][0] == "c000"

    def test_k_exceeding_corpus_returns_all(self):
        index = SparseIndex.build(make_chunks(TOY_TEXTS))
        assert len(index.search(["review"], 50)) == 3

    def test_tie_break_by_chunk_id(self):
        index = SparseIndex.build(make_chunks(["same text", "same text", "same text"]))
        ids = [cid for cid, _ in index.search(["same"], 3)]
        assert ids == ["c000", "c001", "c002"]

    def test_postings_sorted_by_chunk_id(self):
        index = SparseIndex.build(make_chunks(["b a", "a c", "a d"]))
        ids = [cid for cid, _ in index.postings("a")]
        assert ids == sorted(ids)

    def test_punctuation_only_chunk_has_empty_postings(self):
        index = SparseIndex.build(make_chunks(["?!... --- ***"]))
        assert index.doc_lengths["c000"] == 0
        assert index.search(["anything"], 1)[0][0] == "c000"
