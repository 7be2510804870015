"""The self-healing SQL loop: generate, guard, validate, retry with feedback.

The generation provider is called at most ``max_retries + 1`` times. Failed
rounds inject the failing SQL and error into the next prompt; empty results
additionally trigger value introspection on the text columns mentioned in the
WHERE clause. Unauthorized access and non-read-only statements are terminal
on first occurrence and never reach the executor.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime
from typing import Mapping, Sequence

from .charts import ChartDecision, decide_chart
from .fixtures import FIXED_CLOCK
from .guardrails import GuardrailReport, apply_guardrails
from .schema import ResultTable, SchemaContext
from .validate import classify_statement, mask_literals_and_comments, split_statements, validate_sql

FINAL_STATES = ("answered", "fallback_placeholder", "reformulation_suggested", "rejected")

_WHERE_TEXT_REF_RE = re.compile(
    r"(?:LOWER\(\s*)?((?:[A-Za-z_]\w*\.)?([A-Za-z_]\w*))\s*\)?\s*(?:=|LIKE)\s*'",
    re.IGNORECASE,
)


@dataclass
class SqlAttempt:
    round: int
    sql_text: str
    validation: str
    error_message: str | None = None
    rows: ResultTable | None = None

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "sql_text": self.sql_text,
            "validation": self.validation,
            "error_message": self.error_message,
            "rows": self.rows.to_dict() if self.rows is not None else None,
        }

    @classmethod
    def from_dict(cls, rec: Mapping) -> "SqlAttempt":
        return cls(
            round=rec["round"],
            sql_text=rec["sql_text"],
            validation=rec["validation"],
            error_message=rec.get("error_message"),
            rows=ResultTable.from_dict(rec["rows"]) if rec.get("rows") else None,
        )


@dataclass
class T2sResult:
    attempts: list[SqlAttempt]
    final: str
    table: ResultTable | None
    chart: ChartDecision
    narrative: str
    guardrails: GuardrailReport = field(default_factory=GuardrailReport)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "attempts": [a.to_dict() for a in self.attempts],
            "final": self.final,
            "table": self.table.to_dict() if self.table is not None else None,
            "chart": self.chart.to_dict(),
            "narrative": self.narrative,
            "guardrails": self.guardrails.to_dict(),
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, rec: Mapping) -> "T2sResult":
        report = GuardrailReport()
        for note in rec.get("guardrails", {}).get("notes", []):
            report.add(note["kind"], note["note"])
        return cls(
            attempts=[SqlAttempt.from_dict(a) for a in rec["attempts"]],
            final=rec["final"],
            table=ResultTable.from_dict(rec["table"]) if rec.get("table") else None,
            chart=ChartDecision.from_dict(rec["chart"]),
            narrative=rec["narrative"],
            guardrails=report,
            warnings=list(rec.get("warnings", [])),
        )


def _format_value(value) -> str:
    return "NULL" if value is None else str(value)


def build_prompt(
    schema: SchemaContext,
    question: str,
    history: Sequence[str] = (),
    failure: SqlAttempt | None = None,
    hints: Mapping[str, list[str]] | None = None,
) -> str:
    """Serialize schema, samples, dialect, and optional correction feedback."""
    lines = [f"DIALECT: {schema.dialect}"]
    for table in schema.tables:
        cols = ", ".join(
            f"{c.name} {c.type}" + (f" [{c.unit}]" if c.unit else "") for c in table.columns
        )
        lines.append(f"TABLE {table.name} ({cols})")
        for row in table.sample_rows:
            lines.append(f"  SAMPLE: ({', '.join(_format_value(v) for v in row)})")
    for turn in history:
        lines.append(f"HISTORY: {turn}")
    lines.append(f"QUESTION: {question}")
    if failure is not None:
        lines.append("CORRECTION: the previous SQL failed; fix it.")
        lines.append(f"FAILED SQL: {failure.sql_text}")
        lines.append(f"ERROR: {failure.error_message or failure.validation}")
    if hints:
        for column in sorted(hints):
            values = ", ".join(hints[column])
            lines.append(f"KNOWN VALUES: {column} IN {{{values}}}")
    lines.append("Respond with a single read-only SELECT statement.")
    return "\n".join(lines)


def introspect_on_empty(
    failed_attempt: SqlAttempt,
    schema: SchemaContext,
    executor,
    limit: int = 20,
) -> dict[str, list[str]]:
    """After an empty result, fetch DISTINCT values for the text columns the
    failing WHERE clause filtered on, to steer the next generation round.

    Introspection failures yield an empty hint set; the retry proceeds anyway.
    """
    masked = mask_literals_and_comments(failed_attempt.sql_text)
    where = re.search(r"\bWHERE\b", masked, re.IGNORECASE)
    if not where:
        return {}
    text_cols = schema.text_columns()
    hints: dict[str, list[str]] = {}
    for m in _WHERE_TEXT_REF_RE.finditer(failed_attempt.sql_text):
        if m.start() < where.end():
            continue
        column = m.group(2).lower()
        if column not in text_cols or column in hints:
            continue
        table = schema.table_of(column)
        if table is None:
            continue
        result = executor.execute(f"SELECT DISTINCT {column} FROM {table} LIMIT {limit}", limit)
        if result.error is not None:
            continue
        values = sorted(str(row[0]) for row in result.rows if row and row[0] is not None)
        if values:
            hints[column] = values[:limit]
    return hints


def merge_tables(first: ResultTable, second: ResultTable) -> ResultTable | None:
    """Inner-join two step results on their first shared column name."""
    shared = [c for c in first.columns if c in second.columns]
    if not shared:
        return None
    key = shared[0]
    ki = first.columns.index(key)
    kj = second.columns.index(key)
    extra_cols = [c for c in second.columns if c != key]
    extra_idx = [second.columns.index(c) for c in extra_cols]
    lookup: dict = {}
    for row in second.rows:
        lookup.setdefault(row[kj], [row[i] for i in extra_idx])
    merged_rows = [
        list(row) + lookup[row[ki]] for row in first.rows if row[ki] in lookup
    ]
    return ResultTable(columns=list(first.columns) + extra_cols, rows=merged_rows)


def _narrative(
    question: str,
    final: str,
    table: ResultTable | None,
    report: GuardrailReport,
    warnings: Sequence[str],
    attempts: Sequence[SqlAttempt],
) -> str:
    parts: list[str] = []
    if final == "answered" and table is not None:
        parts.append(f"The query returned {len(table.rows)} row(s) over {len(table.columns)} column(s).")
        if len(attempts) > 1:
            parts.append(f"The answer required {len(attempts)} attempt(s); earlier rounds were self-corrected.")
    elif final == "fallback_placeholder":
        parts.append(
            "No rows matched after all retries; returning an empty placeholder table. "
            "An empty result here reflects retrieval failure, not a verified zero."
        )
    elif final == "reformulation_suggested":
        parts.append(
            "The question could not be translated into valid SQL; consider rephrasing it "
            "with explicit table or column names."
        )
    elif final == "rejected":
        parts.append("The request was rejected: generated SQL violated the read-only or column-access policy.")
    for note in report.notes:
        parts.append(f"Guardrail {note.kind}: {note.note}.")
    parts.extend(f"Warning: {w}." for w in warnings)
    return " ".join(parts)


def _probe_future_rows(report: GuardrailReport, executor, warnings: list[str]) -> None:
    info = report.meta.get("date_bound")
    if not info:
        return
    table, column, upper = info.get("table"), info.get("column"), info.get("upper")
    if not table or not column or not upper:
        return
    result = executor.execute(
        f"SELECT COUNT(*) FROM {table} WHERE {column} > '{upper}'", 1
    )
    if result.error is None and result.rows and result.rows[0][0]:
        count = result.rows[0][0]
        warnings.append(
            f"{count} future-dated row(s) in {table}.{column} were excluded by the date bound"
        )


def run_with_retry(
    question: str,
    schema: SchemaContext,
    executor,
    llm_provider,
    max_retries: int = 2,
    clock: datetime | None = None,
    history: Sequence[str] = (),
    row_limit: int = 1000,
    chart_hint: str | None = None,
) -> T2sResult:
    """Bounded generate -> guard -> validate loop.

    Exhaustion maps to ``fallback_placeholder`` when execution ran but gave
    nothing (or failed), and ``reformulation_suggested`` for persistent
    syntax-level failures. Safety violations are terminal immediately.
    """
    if max_retries < 0:
        raise ValueError(f"max_retries must be >= 0, got {max_retries}")
    clock = clock or FIXED_CLOCK
    attempts: list[SqlAttempt] = []
    report = GuardrailReport()
    warnings: list[str] = []
    failure: SqlAttempt | None = None
    hints: dict[str, list[str]] = {}
    last_empty_table: ResultTable | None = None

    def finish(final: str, table: ResultTable | None) -> T2sResult:
        chart = decide_chart(table, user_hint=chart_hint if chart_hint is not None else question)
        narrative = _narrative(question, final, table, report, warnings, attempts)
        return T2sResult(
            attempts=attempts,
            final=final,
            table=table,
            chart=chart,
            narrative=narrative,
            guardrails=report,
            warnings=warnings,
        )

    for round_no in range(1, max_retries + 2):
        prompt = build_prompt(schema, question, history, failure, hints)
        raw = llm_provider.generate(prompt)
        statements = split_statements(raw)

        if not statements or len(statements) > 2:
            reason = "no SQL statement found" if not statements else "more than two statements"
            failure = SqlAttempt(round_no, raw.strip(), "syntax_error", reason)
            attempts.append(failure)
            continue

        step_tables: list[ResultTable] = []
        round_failed = False
        for stmt in statements:
            kind = classify_statement(stmt)
            if kind == "not_read_only":
                report.add("readonly_reject", "statement was not a read-only SELECT; execution refused")
                attempts.append(SqlAttempt(round_no, stmt, "not_read_only", "only read-only SELECT statements are allowed"))
                return finish("rejected", None)

            guarded, stmt_report = apply_guardrails(question, stmt, schema, clock)
            report.merge(stmt_report)
            outcome = validate_sql(guarded, schema, executor, row_limit)
            attempt = SqlAttempt(round_no, guarded, outcome.status, outcome.error, outcome.table if outcome.status == "ok" else None)
            attempts.append(attempt)

            if outcome.status == "unauthorized":
                report.add("column_authorization", outcome.error or "unauthorized column access")
                return finish("rejected", None)
            if outcome.status == "not_read_only":
                report.add("readonly_reject", outcome.error or "statement rejected as not read-only")
                return finish("rejected", None)
            if outcome.status != "ok":
                failure = attempt
                if outcome.status == "empty_result":
                    hints = introspect_on_empty(attempt, schema, executor)
                    # Keep the empty shape around for the placeholder fallback.
                    last_empty_table = outcome.table
                else:
                    hints = {}
                round_failed = True
                break
            step_tables.append(outcome.table)

        if round_failed:
            continue

        if len(step_tables) == 2:
            merged = merge_tables(step_tables[0], step_tables[1])
            if merged is None:
                failure = SqlAttempt(
                    round_no,
                    statements[-1],
                    "execution_error",
                    "two-step results share no column to merge on",
                )
                attempts.append(failure)
                continue
            table = merged
        else:
            table = step_tables[0]

        _probe_future_rows(report, executor, warnings)
        return finish("answered", table)

    assert failure is not None
    if failure.validation == "syntax_error":
        return finish("reformulation_suggested", None)
    return finish("fallback_placeholder", last_empty_table)
