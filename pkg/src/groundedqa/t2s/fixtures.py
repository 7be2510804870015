"""Embedded demo databases: a logistics schema and a retail/music schema.

These back the planner's scenario tests and the demo datasources exposed by
the service (`fixture:logistics`, `fixture:music`). The clock is fixed so
date guardrails are reproducible: some shipment rows are deliberately dated
after FIXED_CLOCK to exercise the future-row anomaly path.
"""

from __future__ import annotations

from datetime import datetime

from .schema import ColumnInfo, SchemaContext, SqliteExecutor, TableInfo, sqlite_from_rows

FIXED_CLOCK = datetime(2025, 6, 15, 0, 0, 0)

_SHIPMENT_ROWS = [
    (1, "open", 1609.34, "2025-06-01", "Austin"),
    (2, "shipped", 8046.70, "2025-05-20", "Boston"),
    (3, "closed", 3218.68, "2025-04-02", "Chicago"),
    (4, "open", 4828.02, "2025-03-28", "Denver"),
    (5, "shipped", 12874.72, "2025-02-14", "El Paso"),
    (6, "closed", 6437.36, "2024-12-30", "Fresno"),
    (7, "open", 1609.34, "2026-01-05", "Georgetown"),
    (8, "shipped", 3218.68, "2026-02-11", "Houston"),
]

_ALBUM_ROWS = [
    (1, "Night Drives", "Hip Hop"),
    (2, "Concrete Poetry", "Hip Hop"),
    (3, "Blue Hour", "Jazz"),
    (4, "Amplifier", "Rock"),
    (5, "Quiet Rivers", "Folk"),
]

_CUSTOMER_ROWS = [
    (1, "Ana Silva", "Brazil", "ana@example.com"),
    (2, "Ben Okafor", "Nigeria", "ben@example.com"),
    (3, "Chen Wei", "China", "chen@example.com"),
    (4, "Dara Kim", "Korea", "dara@example.com"),
]

_PURCHASE_ROWS = [
    (1, 1, 1, 3, "2025-04-01"),
    (2, 1, 2, 5, "2025-04-03"),
    (3, 1, 1, 4, "2025-04-10"),
    (4, 2, 3, 6, "2025-04-11"),
    (5, 2, 3, 2, "2025-05-02"),
    (6, 2, 4, 1, "2025-05-19"),
    (7, 3, 2, 2, "2025-05-21"),
    (8, 4, 4, 1, "2025-06-01"),
    (9, 5, 1, 1, "2025-06-02"),
]


def build_logistics() -> tuple[SchemaContext, SqliteExecutor]:
    conn = sqlite_from_rows(
        [
            (
                "shipments",
                (
                    "shipment_id INTEGER",
                    "status TEXT",
                    "distance REAL",
                    "shipped_at TIMESTAMP",
                    "destination TEXT",
                ),
                _SHIPMENT_ROWS,
            )
        ]
    )
    schema = SchemaContext(
        dialect="generic",
        tables=[
            TableInfo(
                name="shipments",
                columns=(
                    ColumnInfo("shipment_id", "INTEGER"),
                    ColumnInfo("status", "TEXT"),
                    ColumnInfo("distance", "REAL", unit="metres"),
                    ColumnInfo("shipped_at", "TIMESTAMP"),
                    ColumnInfo("destination", "TEXT"),
                ),
                sample_rows=tuple(tuple(r) for r in _SHIPMENT_ROWS[:3]),
            )
        ],
    )
    return schema, SqliteExecutor(conn)


def build_music() -> tuple[SchemaContext, SqliteExecutor]:
    conn = sqlite_from_rows(
        [
            (
                "albums",
                ("album_id INTEGER", "title TEXT", "genre TEXT"),
                _ALBUM_ROWS,
            ),
            (
                "customers",
                ("customer_id INTEGER", "name TEXT", "country TEXT", "email TEXT"),
                _CUSTOMER_ROWS,
            ),
            (
                "purchases",
                (
                    "purchase_id INTEGER",
                    "album_id INTEGER",
                    "customer_id INTEGER",
                    "quantity INTEGER",
                    "purchased_at TIMESTAMP",
                ),
                _PURCHASE_ROWS,
            ),
        ]
    )
    schema = SchemaContext(
        dialect="generic",
        tables=[
            TableInfo(
                name="albums",
                columns=(
                    ColumnInfo("album_id", "INTEGER"),
                    ColumnInfo("title", "TEXT"),
                    ColumnInfo("genre", "TEXT"),
                ),
                sample_rows=tuple(tuple(r) for r in _ALBUM_ROWS[:3]),
            ),
            TableInfo(
                name="customers",
                columns=(
                    ColumnInfo("customer_id", "INTEGER"),
                    ColumnInfo("name", "TEXT"),
                    ColumnInfo("country", "TEXT"),
                    ColumnInfo("email", "TEXT"),
                ),
                sample_rows=tuple(tuple(r) for r in _CUSTOMER_ROWS[:3]),
            ),
            TableInfo(
                name="purchases",
                columns=(
                    ColumnInfo("purchase_id", "INTEGER"),
                    ColumnInfo("album_id", "INTEGER"),
                    ColumnInfo("customer_id", "INTEGER"),
                    ColumnInfo("quantity", "INTEGER"),
                    ColumnInfo("purchased_at", "TIMESTAMP"),
                ),
                sample_rows=tuple(tuple(r) for r in _PURCHASE_ROWS[:3]),
            ),
        ],
        # Customer emails stay out of reach of generated SQL.
        authorized_columns={
            "album_id",
            "title",
            "genre",
            "customer_id",
            "name",
            "country",
            "purchase_id",
            "quantity",
            "purchased_at",
        },
    )
    return schema, SqliteExecutor(conn)


FIXTURES = {
    "logistics": build_logistics,
    "music": build_music,
}
