"""Read-only SQL validation: statement classification, column authorization,
dry run, and execution.

The classifier is a lightweight lexical pass, not a grammar: it masks string
literals, quoted identifiers, and comments, then inspects keywords. That is
enough to enforce the two safety contracts (only single SELECT statements
reach the executor; unauthorized columns never execute) without a full parser.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .schema import ResultTable, SchemaContext

WRITE_VERBS = frozenset(
    """
    insert update delete merge replace upsert create alter drop truncate
    rename grant revoke vacuum pragma attach detach copy exec execute call
    begin commit rollback set use
    """.split()
)

# Keywords that may appear inside a legitimate SELECT but signal writes or
# side effects anywhere in the statement (SELECT ... INTO creates tables).
BANNED_ANYWHERE = frozenset(WRITE_VERBS | {"into"})

SQL_KEYWORDS = frozenset(
    """
    select from where group by order having limit offset join inner left right
    full outer cross on as and or not in is null like between exists union all
    distinct case when then else end with recursive asc desc using values
    cast over partition rows range current row unbounded preceding following
    glob regexp escape collate if ifnull nullif
    """.split()
)

SQL_FUNCTIONS = frozenset(
    """
    count sum avg min max abs round lower upper length substr substring trim
    ltrim rtrim replace coalesce date datetime time strftime julianday printf
    group_concat total random hex typeof instr row_number rank dense_rank
    """.split()
)

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)?")
_WORD_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def mask_literals_and_comments(sql: str) -> str:
    """Replace quoted regions and comments with spaces, preserving offsets."""
    out = list(sql)
    i = 0
    n = len(sql)

    def blank(a: int, b: int) -> None:
        for j in range(a, min(b, n)):
            out[j] = " "

    while i < n:
        ch = sql[i]
        if ch == "-" and sql[i : i + 2] == "--":
            j = i
            while j < n and sql[j] not in "\r\n":
                j += 1
            blank(i, j)
            i = j
        elif ch == "#":
            j = i
            while j < n and sql[j] not in "\r\n":
                j += 1
            blank(i, j)
            i = j
        elif ch == "/" and sql[i : i + 2] == "/*":
            j = sql.find("*/", i + 2)
            j = n if j == -1 else j + 2
            blank(i, j)
            i = j
        elif ch in ("'", '"', "`"):
            quote = ch
            j = i + 1
            while j < n:
                if sql[j] == quote:
                    if sql[j : j + 2] == quote * 2:
                        j += 2
                        continue
                    j += 1
                    break
                j += 1
            else:
                j = n
            blank(i, j)
            i = j
        elif ch == "[":
            j = sql.find("]", i + 1)
            j = n if j == -1 else j + 1
            blank(i, j)
            i = j
        else:
            i += 1
    return "".join(out)


def split_statements(sql: str) -> list[str]:
    """Split raw model output into statements on semicolons outside literals."""
    masked = mask_literals_and_comments(sql)
    statements: list[str] = []
    start = 0
    for i, ch in enumerate(masked):
        if ch == ";":
            part = sql[start:i].strip()
            if part:
                statements.append(part)
            start = i + 1
    tail = sql[start:].strip()
    if tail:
        statements.append(tail)
    return statements


def classify_statement(sql: str) -> str:
    """Classify one statement as 'select', 'not_read_only', or 'syntax_error'."""
    masked = mask_literals_and_comments(sql).strip().rstrip(";").strip()
    if not masked:
        return "syntax_error"
    if ";" in masked:
        return "not_read_only"
    words = _WORD_RE.findall(masked.lower())
    if not words:
        return "syntax_error"
    first = words[0]
    if first in ("select", "with"):
        banned = sorted(set(words) & BANNED_ANYWHERE)
        return "not_read_only" if banned else "select"
    if first in WRITE_VERBS:
        return "not_read_only"
    return "syntax_error"


def referenced_columns(sql: str, schema: SchemaContext) -> set[str]:
    """Schema columns referenced by the statement (case-insensitive).

    Identifiers that are not schema columns (aliases, table names, keywords,
    function names) are ignored; they are the executor's problem.
    """
    masked = mask_literals_and_comments(sql)
    known = schema.all_columns
    refs: set[str] = set()
    for m in _IDENT_RE.finditer(masked):
        ident = m.group(0).lower()
        column = ident.rsplit(".", 1)[-1]
        if column in SQL_KEYWORDS or column in SQL_FUNCTIONS:
            continue
        if column in known:
            refs.add(column)
    return refs


_WILDCARD_RE = re.compile(r"(?:\bSELECT\s*\*|,\s*\*|\.\s*\*)", re.IGNORECASE)


def selects_wildcard(sql: str) -> bool:
    """True for `SELECT *` / `t.*` selectors (COUNT(*) does not count)."""
    return _WILDCARD_RE.search(mask_literals_and_comments(sql)) is not None


def unauthorized_columns(sql: str, schema: SchemaContext) -> list[str]:
    bad = set(referenced_columns(sql, schema) - schema.authorized_columns)
    # A wildcard selector would surface every column, so it is unauthorized
    # whenever any column is restricted.
    hidden = sorted(schema.all_columns - schema.authorized_columns)
    if hidden and selects_wildcard(sql):
        bad.add(f"* (would expose {', '.join(hidden)})")
    return sorted(bad)


@dataclass
class ValidationOutcome:
    status: str  # ok | syntax_error | unauthorized | not_read_only | empty_result | execution_error
    error: str | None = None
    table: ResultTable | None = None


def validate_sql(
    sql_text: str, schema: SchemaContext, executor, row_limit: int = 1000
) -> ValidationOutcome:
    """Validation pipeline: statement type, column authorization, dry run,
    then execution. An empty result set is flagged as a retry trigger, not
    success, and neither safety failure ever reaches the executor.
    """
    kind = classify_statement(sql_text)
    if kind == "syntax_error":
        return ValidationOutcome("syntax_error", "statement is not parseable SQL")
    if kind == "not_read_only":
        return ValidationOutcome("not_read_only", "only single SELECT statements are allowed")

    bad = unauthorized_columns(sql_text, schema)
    if bad:
        return ValidationOutcome("unauthorized", f"unauthorized column access: {', '.join(bad)}")

    dry_error = executor.dry_run(sql_text)
    if dry_error is not None:
        status = "syntax_error" if "syntax error" in dry_error.lower() else "execution_error"
        return ValidationOutcome(status, dry_error)

    result = executor.execute(sql_text, row_limit)
    if result.error is not None:
        status = "syntax_error" if "syntax error" in result.error.lower() else "execution_error"
        return ValidationOutcome(status, result.error)
    if not result.rows:
        return ValidationOutcome(
            "empty_result",
            "query executed but returned no rows",
            ResultTable(columns=result.columns, rows=[]),
        )
    return ValidationOutcome("ok", None, ResultTable(columns=result.columns, rows=result.rows))
