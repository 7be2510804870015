"""Offline evaluation: Recall@k / Precision@k over retrieval runs, and
span-based generation metrics from annotated answers.

A gold evidence span counts as covered when some top-k chunk of the same
document overlaps it by at least one character. Recall averages span coverage
per query and then over queries; precision averages the fraction of top-k
chunks that touch any gold span (denominator shrinks when the run returned
fewer than k chunks). Generation metrics are measured in characters over
span unions.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import EvalError
from .ingest import ChunkStore

logger = logging.getLogger(__name__)

DEFAULT_KS = (1, 2, 4, 8, 16, 50)


@dataclass(frozen=True)
class EvidenceSpan:
    doc_id: str
    start_char: int
    end_char: int


@dataclass
class GoldAnnotation:
    query_id: str
    query: str
    evidence_spans: list[EvidenceSpan]
    reference_answer: str | None = None
    dataset: str = "default"

    def __post_init__(self) -> None:
        if not self.evidence_spans:
            raise EvalError(f"query {self.query_id!r}: at least one evidence span required")
        for span in self.evidence_spans:
            if span.start_char < 0 or span.end_char <= span.start_char:
                raise EvalError(f"query {self.query_id!r}: bad span {span}")


@dataclass
class RetrievalRun:
    """query_id -> ranked chunk_ids (no duplicates per query)."""

    rankings: dict[str, list[str]]

    def __post_init__(self) -> None:
        for qid, ranking in self.rankings.items():
            if len(set(ranking)) != len(ranking):
                raise EvalError(f"query {qid!r}: duplicate chunk_ids in ranking")

    @classmethod
    def load(cls, path: str) -> "RetrievalRun":
        rankings = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    rankings[rec["query_id"]] = list(rec["ranked"])
                except (json.JSONDecodeError, KeyError) as exc:
                    raise EvalError(f"{path}:{lineno}: bad run record: {exc}") from exc
        return cls(rankings)


def load_gold(path: str) -> list[GoldAnnotation]:
    gold = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                gold.append(
                    GoldAnnotation(
                        query_id=rec["query_id"],
                        query=rec["query"],
                        evidence_spans=[
                            EvidenceSpan(s["doc_id"], s["start_char"], s["end_char"])
                            for s in rec["evidence_spans"]
                        ],
                        reference_answer=rec.get("reference_answer"),
                        dataset=rec.get("dataset", "default"),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise EvalError(f"{path}:{lineno}: bad gold record: {exc}") from exc
    return gold


def _chunk_overlaps(store: ChunkStore, chunk_id: str, span: EvidenceSpan) -> bool:
    if chunk_id not in store:
        return False
    chunk = store.get(chunk_id)
    if chunk.doc_id != span.doc_id:
        return False
    return chunk.start_char < span.end_char and span.start_char < chunk.end_char


def recall_at_k(
    run: RetrievalRun, gold: Sequence[GoldAnnotation], chunk_store: ChunkStore, k: int
) -> float:
    """Percentage of gold spans covered by the top-k chunks, averaged over queries.

    Queries missing from the run count as zero coverage.
    """
    if k < 1:
        raise EvalError(f"k must be >= 1, got {k}")
    if not gold:
        raise EvalError("gold set is empty")
    _report_missing(run, gold)
    per_query = []
    for ann in gold:
        top = run.rankings.get(ann.query_id, [])[:k]
        covered = sum(
            1
            for span in ann.evidence_spans
            if any(_chunk_overlaps(chunk_store, cid, span) for cid in top)
        )
        per_query.append(covered / len(ann.evidence_spans))
    return 100.0 * sum(per_query) / len(per_query)


def precision_at_k(
    run: RetrievalRun, gold: Sequence[GoldAnnotation], chunk_store: ChunkStore, k: int
) -> float:
    """Percentage of top-k chunks touching any gold span, averaged over queries.

    When a run holds fewer than k chunks the denominator is what it returned;
    queries missing from the run count as zero.
    """
    if k < 1:
        raise EvalError(f"k must be >= 1, got {k}")
    if not gold:
        raise EvalError("gold set is empty")
    _report_missing(run, gold)
    per_query = []
    for ann in gold:
        top = run.rankings.get(ann.query_id, [])[:k]
        if not top:
            per_query.append(0.0)
            continue
        relevant = sum(
            1
            for cid in top
            if any(_chunk_overlaps(chunk_store, cid, span) for span in ann.evidence_spans)
        )
        per_query.append(relevant / len(top))
    return 100.0 * sum(per_query) / len(per_query)


def missing_queries(run: RetrievalRun, gold: Sequence[GoldAnnotation]) -> list[str]:
    return sorted(a.query_id for a in gold if a.query_id not in run.rankings)


def _report_missing(run: RetrievalRun, gold: Sequence[GoldAnnotation]) -> None:
    missing = missing_queries(run, gold)
    if missing:
        logger.warning("%d gold queries missing from run (scored 0): %s", len(missing), missing)


# ---------------------------------------------------------------------------
# Generation metrics
# ---------------------------------------------------------------------------

Span = tuple[int, int]


@dataclass
class TraceAnnotation:
    """Character-span annotation of one answered query."""

    query_id: str
    answer: str
    context_chars: int
    supported_spans: list[Span] = field(default_factory=list)
    unsupported_spans: list[Span] = field(default_factory=list)
    relevant_spans: list[Span] = field(default_factory=list)
    utilized_spans: list[Span] = field(default_factory=list)

    def __post_init__(self) -> None:
        for name, spans, bound in (
            ("supported", self.supported_spans, len(self.answer)),
            ("unsupported", self.unsupported_spans, len(self.answer)),
            ("relevant", self.relevant_spans, self.context_chars),
            ("utilized", self.utilized_spans, self.context_chars),
        ):
            for start, end in spans:
                if not (0 <= start < end <= bound):
                    raise EvalError(
                        f"query {self.query_id!r}: {name} span ({start}, {end}) out of bounds {bound}"
                    )


def merge_spans(spans: Sequence[Span]) -> list[Span]:
    merged: list[Span] = []
    for start, end in sorted(spans):
        if merged and start <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return merged


def span_length(spans: Sequence[Span]) -> int:
    return sum(e - s for s, e in merge_spans(spans))


def span_intersection(a: Sequence[Span], b: Sequence[Span]) -> list[Span]:
    out = []
    for s1, e1 in merge_spans(a):
        for s2, e2 in merge_spans(b):
            lo, hi = max(s1, s2), min(e1, e2)
            if lo < hi:
                out.append((lo, hi))
    return out


def trace_metrics(trace: TraceAnnotation) -> dict[str, float | None]:
    """Compute the four span metrics; zero-length denominators give None.

    completeness      = |relevant ∩ utilized| / |relevant|
    utilization       = |utilized| / context length
    context_relevance = |relevant| / context length
    hallucination     = |unsupported| / answer length
    """
    relevant = span_length(trace.relevant_spans)
    utilized = span_length(trace.utilized_spans)
    overlap = span_length(span_intersection(trace.relevant_spans, trace.utilized_spans))
    answer_len = len(trace.answer)
    context_len = trace.context_chars
    return {
        "completeness": overlap / relevant if relevant else None,
        "utilization": utilized / context_len if context_len else None,
        "context_relevance": relevant / context_len if context_len else None,
        "hallucination": span_length(trace.unsupported_spans) / answer_len if answer_len else None,
    }


def aggregate_trace_metrics(traces: Sequence[TraceAnnotation]) -> dict:
    """Mean of each defined metric plus a count of undefined ones."""
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    undefined: dict[str, int] = {}
    for trace in traces:
        for name, value in trace_metrics(trace).items():
            if value is None:
                undefined[name] = undefined.get(name, 0) + 1
            else:
                sums[name] = sums.get(name, 0.0) + value
                counts[name] = counts.get(name, 0) + 1
    return {
        "means": {name: sums[name] / counts[name] for name in sorted(sums)},
        "undefined_counts": undefined,
        "queries": len(traces),
    }


def load_traces(path: str) -> list[TraceAnnotation]:
    traces = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                traces.append(
                    TraceAnnotation(
                        query_id=rec["query_id"],
                        answer=rec["answer"],
                        context_chars=rec["context_chars"],
                        supported_spans=[tuple(s) for s in rec.get("supported_spans", [])],
                        unsupported_spans=[tuple(s) for s in rec.get("unsupported_spans", [])],
                        relevant_spans=[tuple(s) for s in rec.get("relevant_spans", [])],
                        utilized_spans=[tuple(s) for s in rec.get("utilized_spans", [])],
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise EvalError(f"{path}:{lineno}: bad trace record: {exc}") from exc
    return traces


# ---------------------------------------------------------------------------
# Ablation report
# ---------------------------------------------------------------------------

METRICS_VERSION = "char-overlap/v1"


def _dataset_rows(
    run: RetrievalRun,
    gold: Sequence[GoldAnnotation],
    store: ChunkStore,
    ks: Sequence[int],
) -> list[dict]:
    datasets: dict[str, list[GoldAnnotation]] = {}
    for ann in gold:
        datasets.setdefault(ann.dataset, []).append(ann)
    rows = []
    for name in sorted(datasets):
        subset = datasets[name]
        rows.append(
            {
                "dataset": name,
                "queries": len(subset),
                "recall": {str(k): recall_at_k(run, subset, store, k) for k in ks},
                "precision": {str(k): precision_at_k(run, subset, store, k) for k in ks},
            }
        )
    # Micro-average: every query weighs the same regardless of dataset.
    rows.append(
        {
            "dataset": "ALL",
            "queries": len(gold),
            "recall": {str(k): recall_at_k(run, gold, store, k) for k in ks},
            "precision": {str(k): precision_at_k(run, gold, store, k) for k in ks},
        }
    )
    return rows


def _format_table(policy: str, rows: list[dict], ks: Sequence[int]) -> str:
    header = ["Dataset".ljust(14)]
    header += [f"R@{k}".rjust(8) for k in ks]
    header += [f"P@{k}".rjust(8) for k in ks]
    lines = [f"Policy: {policy}  (metrics {METRICS_VERSION})", "".join(header)]
    for row in rows:
        cells = [row["dataset"][:14].ljust(14)]
        cells += [f"{row['recall'][str(k)]:8.2f}" for k in ks]
        cells += [f"{row['precision'][str(k)]:8.2f}" for k in ks]
        lines.append("".join(cells))
    return "\n".join(lines)


def ablation_report(
    runs: Mapping[str, RetrievalRun],
    gold: Sequence[GoldAnnotation],
    chunk_store: ChunkStore,
    ks: Sequence[int] = DEFAULT_KS,
) -> dict:
    """Evaluate every run (one per chunk policy) against the shared gold set.

    Returns {"text": aligned table(s), "json": machine-readable rows}. Runs
    with differing query sets are a hard error.
    """
    if not runs:
        raise EvalError("no runs given")
    query_sets = {name: set(run.rankings) for name, run in runs.items()}
    reference_name = sorted(query_sets)[0]
    reference = query_sets[reference_name]
    for name, queries in sorted(query_sets.items()):
        if queries != reference:
            raise EvalError(
                "runs evaluate different query sets: "
                f"{reference_name} vs {name}, difference {sorted(queries ^ reference)}"
            )
    tables = []
    payload = {"metrics_version": METRICS_VERSION, "ks": list(ks), "policies": []}
    for policy in sorted(runs):
        rows = _dataset_rows(runs[policy], gold, chunk_store, ks)
        tables.append(_format_table(policy, rows, ks))
        payload["policies"].append({"policy": policy, "rows": rows})
    return {"text": "\n\n".join(tables), "json": payload}
