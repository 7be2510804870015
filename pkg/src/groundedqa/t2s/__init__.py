"""Text-to-SQL planner: validated read-only SQL with a bounded retry loop."""

from .charts import ChartDecision, decide_chart
from .guardrails import GuardrailReport, apply_guardrails
from .pipeline import SqlAttempt, T2sResult, build_prompt, introspect_on_empty, run_with_retry
from .schema import (
    ColumnInfo,
    ExecResult,
    ResultTable,
    SchemaContext,
    SpyExecutor,
    SqliteExecutor,
    TableInfo,
)
from .validate import ValidationOutcome, classify_statement, split_statements, validate_sql

__all__ = [
    "ChartDecision",
    "decide_chart",
    "GuardrailReport",
    "apply_guardrails",
    "SqlAttempt",
    "T2sResult",
    "build_prompt",
    "introspect_on_empty",
    "run_with_retry",
    "ColumnInfo",
    "ExecResult",
    "ResultTable",
    "SchemaContext",
    "SpyExecutor",
    "SqliteExecutor",
    "TableInfo",
    "ValidationOutcome",
    "classify_statement",
    "split_statements",
    "validate_sql",
]
