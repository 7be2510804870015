"""Shared fixtures, corpus builders, and the acceptance-criteria reporter."""

from __future__ import annotations

import random

import pytest

_ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        _ACCEPTANCE_RESULTS.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, outcome in _ACCEPTANCE_RESULTS:
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{status}] {name}")

from groundedqa.ingest import Chunk, ChunkPolicy, ChunkStore, Document, chunk_document
from groundedqa.providers import HashEmbedder
from groundedqa.retrieval import RetrievalConfig, build_indexes

VOCAB = [f"word{i}" for i in range(500)]


def make_text(rng: random.Random, n_tokens: int, vocab=None) -> str:
    return " ".join(rng.choices(vocab or VOCAB, k=n_tokens))


def make_chunks(texts: list[str], doc_id: str = "doc") -> list[Chunk]:
    """Wrap bare texts as one single-chunk document each (ids c000, c001, ...)."""
    chunks = []
    offset = 0
    for i, text in enumerate(texts):
        chunks.append(
            Chunk(
                chunk_id=f"c{i:03d}",
                doc_id=f"{doc_id}{i}",
                seq=0,
                start_token=0,
                end_token=len(text.split()),
                start_char=offset,
                end_char=offset + len(text),
                text=text,
            )
        )
        offset += len(text)
    return chunks


def make_corpus_store(
    rng: random.Random,
    n_docs: int,
    tokens_per_doc: int = 80,
    window: int = 60,
    overlap: int = 10,
    vocab=None,
) -> ChunkStore:
    policy = ChunkPolicy(window_tokens=window, overlap_tokens=overlap)
    chunks = []
    for i in range(n_docs):
        doc = Document(
            doc_id=f"d{i:04d}",
            title=f"Doc {i}",
            text=make_text(rng, tokens_per_doc, vocab),
            source_uri=f"file:///corpus/d{i:04d}.txt",
        )
        chunks.extend(chunk_document(doc, policy))
    return ChunkStore(chunks)


@pytest.fixture(scope="session")
def small_index():
    """A 60-doc index shared by read-only retrieval tests."""
    rng = random.Random(7)
    store = make_corpus_store(rng, 60)
    return build_indexes(store, HashEmbedder(64), RetrievalConfig())
