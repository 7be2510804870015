"""Retrieval metrics against hand-enumerated values, and span-metric arithmetic."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groundedqa.errors import EvalError
from groundedqa.evalkit import (
    EvidenceSpan,
    GoldAnnotation,
    RetrievalRun,
    TraceAnnotation,
    ablation_report,
    aggregate_trace_metrics,
    merge_spans,
    precision_at_k,
    recall_at_k,
    span_intersection,
    trace_metrics,
)
from groundedqa.ingest import Chunk, ChunkStore


def chunk_at(cid: str, doc: str, start: int, end: int) -> Chunk:
    return Chunk(cid, doc, 0, 0, end - start, start, end, "x" * (end - start))


# Two documents, four chunks each, at 100-char tiles.
STORE = ChunkStore(
    [chunk_at(f"{d}-{i}", d, i * 100, (i + 1) * 100) for d in ("docA", "docB") for i in range(4)]
)


def gold(qid: str, spans, dataset="default") -> GoldAnnotation:
    return GoldAnnotation(
        query_id=qid,
        query=f"query {qid}",
        evidence_spans=[EvidenceSpan(*s) for s in spans],
        dataset=dataset,
    )


class TestRecall:
    def test_full_coverage_is_100(self):
        run = RetrievalRun({"q1": ["docA-0", "docA-1"]})
        g = [gold("q1", [("docA", 10, 20), ("docA", 150, 160)])]
        assert recall_at_k(run, g, STORE, 2) == 100.0

    def test_hand_enumerated_mean(self):
        # q1: 2 spans, only one covered at k=2 -> 50; q2: 1 span covered -> 100.
        run = RetrievalRun({"q1": ["docA-0", "docA-1"], "q2": ["docB-3"]})
        g = [
            gold("q1", [("docA", 10, 20), ("docA", 350, 360)]),
            gold("q2", [("docB", 310, 320)]),
        ]
        assert recall_at_k(run, g, STORE, 2) == pytest.approx(75.0)

    def test_k_larger_than_corpus_saturates(self):
        run = RetrievalRun({"q1": [c.chunk_id for c in STORE]})
        g = [gold("q1", [("docA", 10, 20), ("docB", 350, 360)])]
        assert recall_at_k(run, g, STORE, 999) == recall_at_k(run, g, STORE, len(STORE))

    def test_missing_query_counts_zero(self):
        run = RetrievalRun({"q1": ["docA-0"]})
        g = [gold("q1", [("docA", 10, 20)]), gold("q2", [("docB", 10, 20)])]
        assert recall_at_k(run, g, STORE, 1) == pytest.approx(50.0)

    def test_one_char_overlap_counts(self):
        run = RetrievalRun({"q1": ["docA-0"]})
        # Chunk docA-0 covers [0, 100); span [99, 150) overlaps by one char.
        assert recall_at_k(run, [gold("q1", [("docA", 99, 150)])], STORE, 1) == 100.0
        # Span [100, 150) does not overlap the half-open chunk range.
        assert recall_at_k(run, [gold("q1", [("docA", 100, 150)])], STORE, 1) == 0.0

    def test_wrong_doc_no_overlap(self):
        run = RetrievalRun({"q1": ["docB-0"]})
        assert recall_at_k(run, [gold("q1", [("docA", 10, 20)])], STORE, 1) == 0.0


class TestPrecision:
    def test_all_relevant_is_100(self):
        run = RetrievalRun({"q1": ["docA-0", "docA-1"]})
        g = [gold("q1", [("docA", 50, 250)])]
        assert precision_at_k(run, g, STORE, 2) == 100.0

    def test_one_of_four(self):
        run = RetrievalRun({"q1": ["docA-0", "docA-1", "docA-2", "docA-3"]})
        g = [gold("q1", [("docA", 10, 20)])]
        assert precision_at_k(run, g, STORE, 4) == pytest.approx(25.0)

    def test_k1_relevant_top(self):
        run = RetrievalRun({"q1": ["docA-0"]})
        g = [gold("q1", [("docA", 10, 20)])]
        assert precision_at_k(run, g, STORE, 1) == 100.0

    def test_short_run_uses_returned_count(self):
        run = RetrievalRun({"q1": ["docA-0", "docA-1"]})
        g = [gold("q1", [("docA", 10, 120)])]
        # Both returned chunks touch the span; k=10 but only 2 returned.
        assert precision_at_k(run, g, STORE, 10) == 100.0


def test_recall_monotone_in_k_randomized():
    rng = random.Random(23)
    ids = [c.chunk_id for c in STORE]
    for _ in range(30):
        ranking = rng.sample(ids, k=rng.randint(1, len(ids)))
        run = RetrievalRun({"q": ranking})
        spans = [("docA" if rng.random() < 0.5 else "docB", s, s + 30) for s in rng.sample(range(0, 360, 30), k=3)]
        g = [gold("q", spans)]
        values = [recall_at_k(run, g, STORE, k) for k in range(1, len(ids) + 1)]
        assert values == sorted(values)


class TestTraceMetrics:
    def test_fully_extractive_answer_zero_hallucination(self):
        trace = TraceAnnotation(
            query_id="q",
            answer="A supported answer.",
            context_chars=100,
            supported_spans=[(0, 19)],
            relevant_spans=[(0, 50)],
            utilized_spans=[(0, 19)],
        )
        assert trace_metrics(trace)["hallucination"] == 0.0

    def test_worked_example_ratios(self):
        trace = TraceAnnotation(
            query_id="q",
            answer="x" * 80,
            context_chars=1000,
            relevant_spans=[(0, 400)],
            utilized_spans=[(50, 350)],  # 300 chars, all inside relevant
        )
        metrics = trace_metrics(trace)
        assert metrics["completeness"] == pytest.approx(0.75)
        assert metrics["utilization"] == pytest.approx(0.3)
        assert metrics["context_relevance"] == pytest.approx(0.4)

    def test_hallucination_fraction(self):
        trace = TraceAnnotation(
            query_id="q",
            answer="a" * 200,
            context_chars=10,
            unsupported_spans=[(100, 150)],
        )
        assert trace_metrics(trace)["hallucination"] == pytest.approx(0.25)

    def test_zero_denominators_are_undefined(self):
        trace = TraceAnnotation(query_id="q", answer="", context_chars=0)
        metrics = trace_metrics(trace)
        assert all(v is None for v in metrics.values())
        agg = aggregate_trace_metrics([trace])
        assert agg["means"] == {}
        assert agg["undefined_counts"]["hallucination"] == 1

    def test_span_bounds_validated(self):
        with pytest.raises(EvalError):
            TraceAnnotation(query_id="q", answer="ab", context_chars=5, supported_spans=[(0, 3)])


@settings(max_examples=60, deadline=None)
@given(
    answer_len=st.integers(min_value=1, max_value=300),
    context_len=st.integers(min_value=1, max_value=300),
    data=st.data(),
)
def test_trace_metrics_bounded(answer_len, context_len, data):
    def spans(bound, max_n=4):
        out = []
        for _ in range(data.draw(st.integers(min_value=0, max_value=max_n))):
            start = data.draw(st.integers(min_value=0, max_value=bound - 1))
            end = data.draw(st.integers(min_value=start + 1, max_value=bound))
            out.append((start, end))
        return out

    trace = TraceAnnotation(
        query_id="q",
        answer="x" * answer_len,
        context_chars=context_len,
        supported_spans=spans(answer_len),
        unsupported_spans=spans(answer_len),
        relevant_spans=spans(context_len),
        utilized_spans=spans(context_len),
    )
    for value in trace_metrics(trace).values():
        assert value is None or 0.0 <= value <= 1.0


class TestSpanAlgebra:
    def test_merge_overlapping(self):
        assert merge_spans([(0, 10), (5, 15), (20, 25)]) == [(0, 15), (20, 25)]

    def test_intersection(self):
        assert span_intersection([(0, 10)], [(5, 20)]) == [(5, 10)]
        assert span_intersection([(0, 5)], [(5, 10)]) == []


class TestAblationReport:
    def _simple(self):
        run = RetrievalRun({"q1": ["docA-0"], "q2": ["docB-0"]})
        g = [gold("q1", [("docA", 10, 20)]), gold("q2", [("docB", 10, 20)])]
        return run, g

    def test_single_dataset_all_row_matches(self):
        run, g = self._simple()
        report = ablation_report({"w1000": run}, g, STORE, ks=(1, 2))
        rows = report["json"]["policies"][0]["rows"]
        assert [r["dataset"] for r in rows] == ["default", "ALL"]
        assert rows[0]["recall"] == rows[1]["recall"]

    def test_twelve_numeric_columns(self):
        run, g = self._simple()
        report = ablation_report({"w1000": run}, g, STORE)
        header = report["text"].splitlines()[1]
        assert header.count("R@") == 6 and header.count("P@") == 6
        row = report["json"]["policies"][0]["rows"][0]
        assert len(row["recall"]) + len(row["precision"]) == 12

    def test_two_policies_shared_gold(self):
        run, g = self._simple()
        other = RetrievalRun({"q1": ["docA-3"], "q2": ["docB-3"]})
        report = ablation_report({"w500": other, "w1000": run}, g, STORE, ks=(1,))
        assert [p["policy"] for p in report["json"]["policies"]] == ["w1000", "w500"]

    def test_mismatched_query_sets_hard_error(self):
        run, g = self._simple()
        other = RetrievalRun({"q1": ["docA-0"]})
        with pytest.raises(EvalError, match="q2"):
            ablation_report({"a": run, "b": other}, g, STORE, ks=(1,))

    def test_reports_byte_identical(self):
        run, g = self._simple()
        a = ablation_report({"p": run}, g, STORE)
        b = ablation_report({"p": run}, g, STORE)
        assert a["text"] == b["text"]
        import json

        assert json.dumps(a["json"]) == json.dumps(b["json"])

    def test_micro_average_over_queries(self):
        # Dataset x has 3 queries (recall 0), dataset y has 1 query (recall 100):
        # micro ALL = 25, macro would be 50.
        run = RetrievalRun({f"q{i}": ["docA-0"] for i in range(3)} | {"q3": ["docB-0"]})
        g = [gold(f"q{i}", [("docA", 350, 360)], dataset="x") for i in range(3)]
        g.append(gold("q3", [("docB", 10, 20)], dataset="y"))
        report = ablation_report({"p": run}, g, STORE, ks=(1,))
        all_row = report["json"]["policies"][0]["rows"][-1]
        assert all_row["recall"]["1"] == pytest.approx(25.0)
