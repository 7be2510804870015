"""Semantic guardrails applied to generated SQL before execution.

Three rewrite rules, each annotating a report rather than failing the query:

* unit conversion  -- the question asks for a unit that differs from a
  column's unit annotation, so the column is wrapped in the conversion
  expression (metres -> miles divides by 1609.34);
* date bound       -- "last N months/days" questions get the date column
  clamped to [now - N, now] under an injected clock, excluding future rows;
* fuzzy text       -- literal equality against a multi-part text value is
  rewritten to a case-insensitive pattern with separators wildcarded.

Applying the rewrites to their own output changes nothing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Mapping

from .schema import SchemaContext
from .validate import mask_literals_and_comments

GUARDRAIL_KINDS = (
    "unit_conversion",
    "date_bound",
    "fuzzy_match",
    "readonly_reject",
    "column_authorization",
)

# (column unit, requested unit) -> expression template. Extensible via the
# ``conversions`` argument of apply_guardrails.
DEFAULT_CONVERSIONS: dict[tuple[str, str], str] = {
    ("metres", "miles"): "{col}/1609.34",
    ("miles", "metres"): "{col}*1609.34",
}

_UNIT_ALIASES = {
    "metre": "metres",
    "metres": "metres",
    "meter": "metres",
    "meters": "metres",
    "m": "metres",
    "mile": "miles",
    "miles": "miles",
}

_LAST_N_RE = re.compile(r"\b(?:last|past)\s+(\d+)\s+(day|days|month|months)\b", re.IGNORECASE)
_EQ_LITERAL_RE = re.compile(r"((?:[A-Za-z_][\w]*\.)?([A-Za-z_][\w]*))\s*=\s*'((?:[^']|'')*)'")
_SEPARATOR_RE = re.compile(r"[^0-9A-Za-z]+")


@dataclass
class GuardrailNote:
    kind: str
    note: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "note": self.note}


@dataclass
class GuardrailReport:
    applied: list[str] = field(default_factory=list)
    notes: list[GuardrailNote] = field(default_factory=list)
    # structured details per kind, e.g. the date-bound window for anomaly probes
    meta: dict[str, dict] = field(default_factory=dict)

    def add(self, kind: str, note: str, **meta) -> None:
        if kind not in GUARDRAIL_KINDS:
            raise ValueError(f"unknown guardrail kind {kind!r}")
        if kind not in self.applied:
            self.applied.append(kind)
        self.notes.append(GuardrailNote(kind, note))
        if meta:
            self.meta.setdefault(kind, {}).update(meta)

    def merge(self, other: "GuardrailReport") -> None:
        for kind in other.applied:
            if kind not in self.applied:
                self.applied.append(kind)
        self.notes.extend(other.notes)
        for kind, data in other.meta.items():
            self.meta.setdefault(kind, {}).update(data)

    def to_dict(self) -> dict:
        return {
            "applied": list(self.applied),
            "notes": [n.to_dict() for n in self.notes],
        }


def subtract_months(moment: datetime, months: int) -> datetime:
    """Calendar-month subtraction, clamping the day to the target month."""
    month_index = moment.year * 12 + (moment.month - 1) - months
    year, month = divmod(month_index, 12)
    month += 1
    day = moment.day
    while True:
        try:
            return moment.replace(year=year, month=month, day=day)
        except ValueError:
            day -= 1


def _question_units(question: str) -> set[str]:
    words = re.findall(r"[a-z]+", question.lower())
    return {_UNIT_ALIASES[w] for w in words if w in _UNIT_ALIASES}


def _column_used(sql_masked: str, column: str) -> bool:
    return re.search(rf"\b{re.escape(column)}\b", sql_masked, re.IGNORECASE) is not None


def _apply_unit_conversion(
    question: str,
    sql: str,
    schema: SchemaContext,
    conversions: Mapping[tuple[str, str], str],
    report: GuardrailReport,
) -> str:
    wanted = _question_units(question)
    if not wanted:
        return sql
    masked = mask_literals_and_comments(sql)
    for column, unit in sorted(schema.units().items()):
        unit = _UNIT_ALIASES.get(unit.lower(), unit.lower())
        for target in sorted(wanted):
            if target == unit or (unit, target) not in conversions:
                continue
            if not _column_used(masked, column):
                continue
            template = conversions[(unit, target)]
            # Idempotence: skip when the conversion is already in place.
            marker = template.format(col=column).lower()
            if marker in re.sub(r"\s+", "", sql.lower()):
                continue
            pattern = re.compile(rf"\b((?:[A-Za-z_]\w*\.)?{re.escape(column)})\b", re.IGNORECASE)
            sql = pattern.sub(lambda m: template.format(col=m.group(1)), sql)
            report.add(
                "unit_conversion",
                f"converted {column} from {unit} to {target} using {template.format(col=column)}",
                column=column,
                from_unit=unit,
                to_unit=target,
            )
    return sql


def _insert_predicate(sql: str, predicate: str) -> str:
    """AND the predicate into the statement's WHERE clause (creating one
    before GROUP/ORDER/LIMIT if absent)."""
    masked = mask_literals_and_comments(sql)
    where = re.search(r"\bWHERE\b", masked, re.IGNORECASE)
    if where:
        pos = where.end()
        return f"{sql[:pos]} {predicate} AND{sql[pos:]}"
    tail = re.search(r"\b(GROUP\s+BY|ORDER\s+BY|LIMIT|HAVING)\b", masked, re.IGNORECASE)
    if tail:
        pos = tail.start()
        return f"{sql[:pos]}WHERE {predicate} {sql[pos:]}"
    return f"{sql.rstrip().rstrip(';')} WHERE {predicate}"


def _apply_date_bound(
    question: str, sql: str, schema: SchemaContext, clock: datetime, report: GuardrailReport
) -> str:
    m = _LAST_N_RE.search(question)
    if not m:
        return sql
    n = int(m.group(1))
    unit = m.group(2).lower()
    masked = mask_literals_and_comments(sql)
    date_cols = sorted(schema.date_columns())
    # Prefer a date column already in the SQL; otherwise clamp the first date
    # column of a table the SQL touches (the model may have dropped the
    # filter entirely, which is exactly the failure this guards against).
    columns = [c for c in date_cols if _column_used(masked, c)]
    if not columns:
        columns = [
            c
            for c in date_cols
            if schema.table_of(c) and _column_used(masked, schema.table_of(c))
        ]
    if not columns:
        return sql
    column = columns[0]
    if unit.startswith("day"):
        lower = clock - timedelta(days=n)
    else:
        lower = subtract_months(clock, n)
    lo = lower.date().isoformat()
    hi = clock.date().isoformat()
    if f"'{lo}'" in sql and f"'{hi}'" in sql:
        return sql
    predicate = f"{column} >= '{lo}' AND {column} <= '{hi}'"
    sql = _insert_predicate(sql, predicate)
    report.add(
        "date_bound",
        f"clamped {column} to [{lo}, {hi}] for 'last {n} {unit}'; future rows excluded",
        column=column,
        table=schema.table_of(column),
        lower=lo,
        upper=hi,
    )
    return sql


def fuzzy_pattern(literal: str) -> str:
    """'hip-hop' -> '%hip%hop%': lowercase parts joined and wrapped by wildcards."""
    parts = [p for p in _SEPARATOR_RE.split(literal.lower()) if p]
    return "%" + "%".join(parts) + "%"


def _apply_fuzzy_match(
    sql: str, schema: SchemaContext, report: GuardrailReport
) -> str:
    text_cols = schema.text_columns()

    def rewrite(m: re.Match) -> str:
        qualified, column, literal = m.group(1), m.group(2), m.group(3)
        if column.lower() not in text_cols:
            return m.group(0)
        # Only multi-part values (separator present) get the fuzzy treatment;
        # single words keep exact equality and can recover via introspection.
        if not _SEPARATOR_RE.search(literal.strip()) or not re.search(r"[A-Za-z]", literal):
            return m.group(0)
        pattern = fuzzy_pattern(literal)
        report.add(
            "fuzzy_match",
            f"rewrote {qualified} = '{literal}' to case-insensitive pattern '{pattern}'",
            column=column.lower(),
            pattern=pattern,
        )
        return f"LOWER({qualified}) LIKE '{pattern}'"

    return _EQ_LITERAL_RE.sub(rewrite, sql)


def apply_guardrails(
    question: str,
    sql_text: str,
    schema: SchemaContext,
    clock: datetime,
    conversions: Mapping[tuple[str, str], str] | None = None,
) -> tuple[str, GuardrailReport]:
    """Run all three rewrites; returns the (possibly) rewritten SQL plus the
    report. Guardrails annotate, they never fail a query."""
    report = GuardrailReport()
    conversions = dict(DEFAULT_CONVERSIONS if conversions is None else conversions)
    sql = _apply_unit_conversion(question, sql_text, schema, conversions, report)
    sql = _apply_date_bound(question, sql, schema, clock, report)
    sql = _apply_fuzzy_match(sql, schema, report)
    return sql, report
