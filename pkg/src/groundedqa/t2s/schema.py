"""Schema context and the executor contract for the SQL planner."""

from __future__ import annotations

import sqlite3
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from ..errors import ConfigurationError

DIALECTS = ("generic", "mysql", "bigquery")

_DATE_TYPE_HINTS = ("date", "time", "timestamp", "datetime")
_TEXT_TYPE_HINTS = ("text", "char", "varchar", "string", "clob")
_NUMERIC_TYPE_HINTS = ("int", "real", "float", "double", "decimal", "numeric", "number")


@dataclass(frozen=True)
class ColumnInfo:
    name: str
    type: str = "TEXT"
    unit: str | None = None

    @property
    def is_text(self) -> bool:
        t = self.type.lower()
        return any(h in t for h in _TEXT_TYPE_HINTS) and not self.is_date

    @property
    def is_date(self) -> bool:
        return any(h in self.type.lower() for h in _DATE_TYPE_HINTS)

    @property
    def is_numeric(self) -> bool:
        return any(h in self.type.lower() for h in _NUMERIC_TYPE_HINTS)


@dataclass(frozen=True)
class TableInfo:
    name: str
    columns: tuple[ColumnInfo, ...]
    sample_rows: tuple[tuple, ...] = ()

    def __post_init__(self) -> None:
        if len(self.sample_rows) > 3:
            raise ConfigurationError(f"table {self.name!r}: at most 3 sample rows allowed")
        for row in self.sample_rows:
            if len(row) != len(self.columns):
                raise ConfigurationError(
                    f"table {self.name!r}: sample row arity {len(row)} != {len(self.columns)} columns"
                )


@dataclass
class SchemaContext:
    tables: list[TableInfo]
    dialect: str = "generic"
    authorized_columns: set[str] = field(default_factory=set)

    def __post_init__(self) -> None:
        if self.dialect not in DIALECTS:
            raise ConfigurationError(f"dialect must be one of {DIALECTS}, got {self.dialect!r}")
        all_cols = self.all_columns
        if not self.authorized_columns:
            self.authorized_columns = set(all_cols)
        else:
            self.authorized_columns = {c.lower() for c in self.authorized_columns}
            stray = self.authorized_columns - all_cols
            if stray:
                raise ConfigurationError(f"authorized columns not in schema: {sorted(stray)}")

    @property
    def all_columns(self) -> set[str]:
        return {c.name.lower() for t in self.tables for c in t.columns}

    @property
    def table_names(self) -> set[str]:
        return {t.name.lower() for t in self.tables}

    def column(self, name: str) -> ColumnInfo | None:
        name = name.lower()
        for t in self.tables:
            for c in t.columns:
                if c.name.lower() == name:
                    return c
        return None

    def table_of(self, column_name: str) -> str | None:
        column_name = column_name.lower()
        for t in self.tables:
            if any(c.name.lower() == column_name for c in t.columns):
                return t.name
        return None

    def text_columns(self) -> set[str]:
        return {c.name.lower() for t in self.tables for c in t.columns if c.is_text}

    def date_columns(self) -> set[str]:
        return {c.name.lower() for t in self.tables for c in t.columns if c.is_date}

    def units(self) -> dict[str, str]:
        return {
            c.name.lower(): c.unit
            for t in self.tables
            for c in t.columns
            if c.unit is not None
        }


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[list]

    def __len__(self) -> int:
        return len(self.rows)

    def to_dict(self) -> dict:
        return {"columns": list(self.columns), "rows": [list(r) for r in self.rows]}

    @classmethod
    def from_dict(cls, rec: Mapping) -> "ResultTable":
        return cls(columns=list(rec["columns"]), rows=[list(r) for r in rec["rows"]])


@dataclass
class ExecResult:
    columns: list[str]
    rows: list[list]
    error: str | None = None


class SqliteExecutor:
    """Executor over a sqlite connection. Only ever receives statements the
    validator has already classified as read-only."""

    def __init__(self, connection: sqlite3.Connection):
        self._conn = connection

    def dry_run(self, sql: str) -> str | None:
        """Plan the statement without running it; returns an error string or None."""
        try:
            self._conn.execute(f"EXPLAIN {sql}").fetchall()
            return None
        except sqlite3.Error as exc:
            return str(exc)

    def execute(self, sql: str, row_limit: int = 1000) -> ExecResult:
        try:
            cursor = self._conn.execute(sql)
            columns = [d[0] for d in cursor.description] if cursor.description else []
            rows = [list(r) for r in cursor.fetchmany(row_limit)]
            return ExecResult(columns=columns, rows=rows)
        except sqlite3.Error as exc:
            return ExecResult(columns=[], rows=[], error=str(exc))


class SpyExecutor:
    """Records every statement passed through; used to assert read-only safety."""

    def __init__(self, inner):
        self._inner = inner
        self.statements: list[str] = []

    def dry_run(self, sql: str) -> str | None:
        self.statements.append(sql)
        return self._inner.dry_run(sql)

    def execute(self, sql: str, row_limit: int = 1000) -> ExecResult:
        self.statements.append(sql)
        return self._inner.execute(sql, row_limit)


def sqlite_from_rows(
    tables: Sequence[tuple[str, Sequence[str], Sequence[Sequence]]]
) -> sqlite3.Connection:
    """Build an in-memory sqlite database from (name, columns_ddl, rows) triples."""
    conn = sqlite3.connect(":memory:", check_same_thread=False)
    for name, columns_ddl, rows in tables:
        conn.execute(f"CREATE TABLE {name} ({', '.join(columns_ddl)})")
        placeholders = ", ".join("?" for _ in columns_ddl)
        conn.executemany(f"INSERT INTO {name} VALUES ({placeholders})", rows)
    conn.commit()
    return conn
