"""Document ingestion: overlapping token-window chunking and the corpus store.

Documents arrive as already-extracted text (one JSON record per line). Each
document is segmented into overlapping windows of ``window_tokens`` tokens
with a stride of ``window - overlap``; the tail window is always emitted even
when it is much shorter, so every token of the source is covered.

Character spans are chosen so that chunks tile the document: chunk 0 starts at
character 0, every later chunk starts at the first character of its first
token, and a chunk ends at the first character of the token after its window
(the final chunk ends at the end of the document). Concatenating chunk texts
after removing overlapped prefixes therefore reproduces the document exactly.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

from .errors import IngestError
from .text import DEFAULT_TOKENIZER, count_tokens, token_spans

CHUNK_FIELDS = (
    "chunk_id",
    "doc_id",
    "seq",
    "start_token",
    "end_token",
    "start_char",
    "end_char",
    "text",
)
DOCUMENT_FIELDS = ("doc_id", "title", "text", "source_uri", "meta")


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str = ""
    text: str = ""
    source_uri: str = ""
    meta: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ChunkPolicy:
    """Windowing parameters. Defaults follow the 1000-token/150-overlap setup."""

    window_tokens: int = 1000
    overlap_tokens: int = 150
    tokenizer_id: str = DEFAULT_TOKENIZER

    def __post_init__(self) -> None:
        if self.window_tokens < 1:
            raise IngestError(f"window_tokens must be >= 1, got {self.window_tokens}")
        if not 0 <= self.overlap_tokens < self.window_tokens:
            raise IngestError(
                "overlap_tokens must satisfy 0 <= overlap < window, got "
                f"overlap={self.overlap_tokens} window={self.window_tokens}"
            )
        # Raises ConfigurationError for unknown schemes.
        count_tokens("", self.tokenizer_id)

    @property
    def stride(self) -> int:
        return self.window_tokens - self.overlap_tokens


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    doc_id: str
    seq: int
    start_token: int
    end_token: int
    start_char: int
    end_char: int
    text: str

    def to_record(self) -> dict:
        return {name: getattr(self, name) for name in CHUNK_FIELDS}

    @classmethod
    def from_record(cls, rec: dict) -> "Chunk":
        return cls(**{name: rec[name] for name in CHUNK_FIELDS})


@dataclass
class CorpusStats:
    docs: int = 0
    chunks: int = 0
    tokens: int = 0

    def to_dict(self) -> dict:
        return {"docs": self.docs, "chunks": self.chunks, "tokens": self.tokens}


def chunk_id_for(doc_id: str, seq: int) -> str:
    """Content-addressed chunk id; ingestion of the same corpus is idempotent."""
    return hashlib.sha1(f"{doc_id}\x1f{seq}".encode("utf-8")).hexdigest()[:16]


def chunk_document(doc: Document, policy: ChunkPolicy) -> list[Chunk]:
    """Split one document into overlapping token windows."""
    spans = token_spans(doc.text, policy.tokenizer_id)
    if not spans:
        raise IngestError(f"document {doc.doc_id!r} has no tokens after normalization")

    total = len(spans)
    chunks: list[Chunk] = []
    start_tok = 0
    seq = 0
    while True:
        end_tok = min(start_tok + policy.window_tokens, total)
        final = end_tok == total
        start_char = 0 if seq == 0 else spans[start_tok][0]
        end_char = len(doc.text) if final else spans[end_tok][0]
        chunks.append(
            Chunk(
                chunk_id=chunk_id_for(doc.doc_id, seq),
                doc_id=doc.doc_id,
                seq=seq,
                start_token=start_tok,
                end_token=end_tok,
                start_char=start_char,
                end_char=end_char,
                text=doc.text[start_char:end_char],
            )
        )
        if final:
            return chunks
        start_tok += policy.stride
        seq += 1


def _parse_document(rec: dict, where: str) -> Document:
    if not isinstance(rec, dict):
        raise IngestError(f"{where}: expected a JSON object")
    missing = [k for k in DOCUMENT_FIELDS if k not in rec]
    if missing:
        raise IngestError(f"{where}: missing fields {missing}")
    doc_id = rec["doc_id"]
    if not isinstance(doc_id, str) or not doc_id:
        raise IngestError(f"{where}: doc_id must be a non-empty string")
    meta = rec["meta"]
    if not isinstance(meta, dict) or any(
        not isinstance(k, str) or not isinstance(v, str) for k, v in meta.items()
    ):
        raise IngestError(f"{where}: meta must be a string-to-string map")
    return Document(
        doc_id=doc_id,
        title=rec["title"],
        text=rec["text"],
        source_uri=rec["source_uri"],
        meta=dict(meta),
    )


def read_documents(input_path: str) -> list[Document]:
    """Read a JSONL corpus, rejecting malformed lines and duplicate doc_ids."""
    docs: list[Document] = []
    seen: dict[str, tuple[int, str]] = {}
    with open(input_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"{input_path}:{lineno}: malformed JSON: {exc}") from exc
            doc = _parse_document(rec, f"{input_path}:{lineno}")
            if doc.doc_id in seen:
                first_line, first_uri = seen[doc.doc_id]
                raise IngestError(
                    f"duplicate doc_id {doc.doc_id!r}: line {first_line} "
                    f"({first_uri or 'no source_uri'}) and line {lineno} "
                    f"({doc.source_uri or 'no source_uri'})"
                )
            seen[doc.doc_id] = (lineno, doc.source_uri)
            docs.append(doc)
    return docs


def ingest_documents(docs: list[Document], policy: ChunkPolicy, store_path: str) -> CorpusStats:
    """Chunk all documents, then write the store atomically (all or nothing)."""
    stats = CorpusStats()
    all_chunks: list[Chunk] = []
    for doc in docs:
        chunks = chunk_document(doc, policy)
        all_chunks.extend(chunks)
        stats.docs += 1
        stats.chunks += len(chunks)
        stats.tokens += chunks[-1].end_token
    write_chunk_store(all_chunks, store_path)
    return stats


def ingest_corpus(input_path: str, policy: ChunkPolicy, store_path: str) -> CorpusStats:
    return ingest_documents(read_documents(input_path), policy, store_path)


def write_chunk_store(chunks: list[Chunk], store_path: str) -> None:
    """Serialize chunks as JSONL via a temp file + rename, so readers never see
    a partially written store."""
    directory = os.path.dirname(os.path.abspath(store_path))
    os.makedirs(directory, exist_ok=True)
    tmp_path = store_path + ".tmp"
    with open(tmp_path, "w", encoding="utf-8") as fh:
        for chunk in chunks:
            fh.write(json.dumps(chunk.to_record(), ensure_ascii=False))
            fh.write("\n")
    os.replace(tmp_path, store_path)


class ChunkStore:
    """In-memory view over a chunk store, ordered as written."""

    def __init__(self, chunks: list[Chunk]):
        self.chunks = chunks
        self._by_id = {c.chunk_id: c for c in chunks}
        if len(self._by_id) != len(chunks):
            raise IngestError("chunk store contains duplicate chunk_ids")

    @classmethod
    def load(cls, store_path: str) -> "ChunkStore":
        chunks = []
        with open(store_path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    chunks.append(Chunk.from_record(json.loads(line)))
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise IngestError(f"{store_path}:{lineno}: bad chunk record: {exc}") from exc
        return cls(chunks)

    def __len__(self) -> int:
        return len(self.chunks)

    def __iter__(self):
        return iter(self.chunks)

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in self._by_id

    def get(self, chunk_id: str) -> Chunk:
        return self._by_id[chunk_id]

    def by_doc(self) -> dict[str, list[Chunk]]:
        grouped: dict[str, list[Chunk]] = {}
        for c in self.chunks:
            grouped.setdefault(c.doc_id, []).append(c)
        return grouped
