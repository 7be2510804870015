"""Chart selection heuristics over query result tables."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

from .schema import ResultTable

CHART_KINDS = ("bar", "line", "pie", "none")

_SHARE_WORDS = frozenset({"share", "shares", "proportion", "proportions", "percentage", "percent"})
_DATEISH_RE = re.compile(r"^\d{4}-\d{2}(-\d{2})?([ T].*)?$")


@dataclass
class ChartDecision:
    kind: str = "none"
    x_column: str | None = None
    y_column: str | None = None
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "x_column": self.x_column,
            "y_column": self.y_column,
            "reason": self.reason,
        }

    @classmethod
    def from_dict(cls, rec: Mapping) -> "ChartDecision":
        return cls(
            kind=rec["kind"],
            x_column=rec.get("x_column"),
            y_column=rec.get("y_column"),
            reason=rec.get("reason", ""),
        )


def _column_values(table: ResultTable, idx: int) -> list:
    return [row[idx] for row in table.rows]


def _is_numeric(values: list) -> bool:
    return bool(values) and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in values
    )


def _is_temporal(values: list) -> bool:
    return bool(values) and all(
        isinstance(v, str) and _DATEISH_RE.match(v) for v in values
    )


def _explicit_kind(hint: str) -> str | None:
    words = set(re.findall(r"[a-z]+", hint.lower()))
    for kind in ("pie", "line", "bar"):
        if kind in words:
            return kind
    return None


def decide_chart(table: ResultTable | None, user_hint: str = "") -> ChartDecision:
    """Pick a chart for a result table.

    Priority: an explicit kind in the user hint wins; then temporal x with a
    numeric y draws a line; small categorical tables draw a pie when the
    question asks for shares/proportions, otherwise a bar; larger categorical
    tables (<= 30 rows) still get a bar; everything else falls back to text.
    """
    if table is None or not table.rows or not table.columns:
        return ChartDecision(reason="no tabular data to chart")

    numeric_idx = [i for i in range(len(table.columns)) if _is_numeric(_column_values(table, i))]
    non_numeric_idx = [i for i in range(len(table.columns)) if i not in numeric_idx]
    if not numeric_idx:
        return ChartDecision(reason="no numeric column to plot")

    y_idx = numeric_idx[0]
    y_col = table.columns[y_idx]
    x_idx = non_numeric_idx[0] if non_numeric_idx else (numeric_idx[1] if len(numeric_idx) > 1 else None)
    x_col = table.columns[x_idx] if x_idx is not None else None
    x_values = _column_values(table, x_idx) if x_idx is not None else []
    n_rows = len(table.rows)

    explicit = _explicit_kind(user_hint)
    if explicit:
        return ChartDecision(explicit, x_col, y_col, f"user hint requested a {explicit} chart")

    if x_idx is not None and _is_temporal(x_values):
        return ChartDecision("line", x_col, y_col, "temporal x axis with numeric y")

    if x_idx is not None and x_idx in non_numeric_idx:
        y_values = _column_values(table, y_idx)
        non_negative = all(v >= 0 for v in y_values)
        share_asked = bool(set(re.findall(r"[a-z]+", user_hint.lower())) & _SHARE_WORDS)
        if 2 <= n_rows <= 8 and non_negative and share_asked:
            return ChartDecision("pie", x_col, y_col, "small categorical breakdown asked as a share")
        if 2 <= n_rows <= 8 and non_negative:
            return ChartDecision("bar", x_col, y_col, "small categorical table with non-negative values")
        if n_rows <= 30:
            return ChartDecision("bar", x_col, y_col, "categorical table within bar-chart size")

    return ChartDecision(reason="non-numeric or sparse shape; falling back to text")
