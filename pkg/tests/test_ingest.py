"""Tokenizer and chunking tests, including the stride-arithmetic oracles."""

from __future__ import annotations

import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groundedqa.errors import ConfigurationError, IngestError
from groundedqa.ingest import (
    ChunkPolicy,
    ChunkStore,
    Document,
    chunk_document,
    ingest_corpus,
    read_documents,
)
from groundedqa.text import count_tokens, tokenize


class TestCountTokens:
    def test_empty(self):
        assert count_tokens("") == 0

    def test_hyphenated_words(self):
        # "hip", "-", "hop", "music"
        assert tokenize("hip-hop music") == ["hip", "-", "hop", "music"]
        assert count_tokens("hip-hop music") == 4

    def test_one_token_per_word(self):
        text = " ".join(f"w{i}" for i in range(1000))
        assert count_tokens(text) == 1000

    def test_punctuation_is_single_tokens(self):
        assert tokenize("a.b,c") == ["a", ".", "b", ",", "c"]

    def test_unknown_tokenizer(self):
        with pytest.raises(ConfigurationError):
            count_tokens("x", tokenizer_id="bpe-9000")


def _doc(n_tokens: int, doc_id: str = "d1") -> Document:
    return Document(doc_id=doc_id, text=" ".join(f"tok{i}" for i in range(n_tokens)))


class TestChunkDocument:
    def test_stride_arithmetic_2500_1000_150(self):
        chunks = chunk_document(_doc(2500), ChunkPolicy(1000, 150))
        assert [c.start_token for c in chunks] == [0, 850, 1700]
        assert [c.end_token for c in chunks] == [1000, 1850, 2500]
        assert chunks[-1].end_token - chunks[-1].start_token == 800

    def test_short_doc_single_chunk(self):
        doc = _doc(400)
        chunks = chunk_document(doc, ChunkPolicy(1000, 150))
        assert len(chunks) == 1
        assert chunks[0].text == doc.text

    def test_zero_overlap_disjoint(self):
        chunks = chunk_document(_doc(1000), ChunkPolicy(500, 0))
        assert [(c.start_token, c.end_token) for c in chunks] == [(0, 500), (500, 1000)]
        assert chunks[0].end_char == chunks[1].start_char

    def test_empty_document_errors_with_doc_id(self):
        with pytest.raises(IngestError, match="dermo"):
            chunk_document(Document(doc_id="dermo", text="   "), ChunkPolicy(10, 2))

    def test_char_spans_reproduce_text(self):
        doc = Document(doc_id="d", text="Alpha beta, gamma. Delta epsilon zeta! Eta theta.")
        for chunk in chunk_document(doc, ChunkPolicy(4, 1)):
            assert chunk.text == doc.text[chunk.start_char : chunk.end_char]

    def test_bad_policy(self):
        with pytest.raises(IngestError):
            ChunkPolicy(10, 10)
        with pytest.raises(IngestError):
            ChunkPolicy(0, 0)


def _roundtrip(doc: Document, chunks) -> str:
    recon = chunks[0].text
    for prev, cur in zip(chunks, chunks[1:]):
        recon += cur.text[prev.end_char - cur.start_char :]
    return recon


@settings(max_examples=60, deadline=None)
@given(
    n_tokens=st.integers(min_value=1, max_value=400),
    window=st.integers(min_value=1, max_value=120),
    data=st.data(),
)
def test_chunking_properties(n_tokens, window, data):
    """Coverage, fixed stride, exact round-trip, and determinism."""
    overlap = data.draw(st.integers(min_value=0, max_value=window - 1))
    rng = random.Random(n_tokens * 1000 + window)
    words = [rng.choice(["aa", "b", "see,", "d-d", "(e)"]) for _ in range(n_tokens)]
    doc = Document(doc_id="p", text=" ".join(words))
    policy = ChunkPolicy(window, overlap)
    total = count_tokens(doc.text)
    chunks = chunk_document(doc, policy)

    covered = set()
    for c in chunks:
        covered.update(range(c.start_token, c.end_token))
    assert covered == set(range(total))
    for a, b in zip(chunks, chunks[1:]):
        assert b.start_token == a.start_token + policy.stride
    assert _roundtrip(doc, chunks) == doc.text
    again = chunk_document(doc, policy)
    assert again == chunks


class TestIngestCorpus:
    def _write_corpus(self, path, docs):
        with open(path, "w", encoding="utf-8") as fh:
            for d in docs:
                fh.write(json.dumps(d) + "\n")

    def _docs(self, n=2, tokens=400):
        return [
            {
                "doc_id": f"d{i}",
                "title": f"t{i}",
                "text": " ".join(f"w{j}" for j in range(tokens)),
                "source_uri": f"file:///{i}",
                "meta": {},
            }
            for i in range(n)
        ]

    def test_counts(self, tmp_path):
        corpus = tmp_path / "corpus.jsonl"
        store = tmp_path / "store.jsonl"
        self._write_corpus(corpus, self._docs())
        stats = ingest_corpus(str(corpus), ChunkPolicy(1000, 150), str(store))
        assert stats.docs == 2 and stats.chunks == 2
        assert len(ChunkStore.load(str(store))) == 2

    def test_idempotent_reingest_byte_identical(self, tmp_path):
        corpus = tmp_path / "corpus.jsonl"
        self._write_corpus(corpus, self._docs())
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        ingest_corpus(str(corpus), ChunkPolicy(1000, 150), str(a))
        ingest_corpus(str(corpus), ChunkPolicy(1000, 150), str(b))
        assert a.read_bytes() == b.read_bytes()
        ids_a = [c.chunk_id for c in ChunkStore.load(str(a))]
        ids_b = [c.chunk_id for c in ChunkStore.load(str(b))]
        assert ids_a == ids_b

    def test_empty_doc_no_partial_writes(self, tmp_path):
        corpus = tmp_path / "corpus.jsonl"
        docs = self._docs() + [
            {"doc_id": "bad", "title": "", "text": " ", "source_uri": "", "meta": {}}
        ]
        self._write_corpus(corpus, docs)
        store = tmp_path / "store.jsonl"
        with pytest.raises(IngestError, match="bad"):
            ingest_corpus(str(corpus), ChunkPolicy(1000, 150), str(store))
        assert not store.exists()

    def test_malformed_line_reports_line_number(self, tmp_path):
        corpus = tmp_path / "corpus.jsonl"
        corpus.write_text('{"doc_id": "a", "title": "", "text": "x", "source_uri": "", "meta": {}}\nnot json\n')
        with pytest.raises(IngestError, match=":2"):
            read_documents(str(corpus))

    def test_duplicate_doc_id_lists_both_sources(self, tmp_path):
        corpus = tmp_path / "corpus.jsonl"
        docs = self._docs(1)
        dup = dict(docs[0], source_uri="file:///other")
        self._write_corpus(corpus, docs + [dup])
        with pytest.raises(IngestError) as exc:
            read_documents(str(corpus))
        message = str(exc.value)
        assert "file:///0" in message and "file:///other" in message

    def test_missing_field_rejected(self, tmp_path):
        corpus = tmp_path / "corpus.jsonl"
        corpus.write_text('{"doc_id": "a", "text": "x"}\n')
        with pytest.raises(IngestError, match="missing fields"):
            read_documents(str(corpus))
