"""Keyed tabular databases.

A Database is an ordered collection of named tables. Every table has a
designated key column of type id; other columns carry a primitive type
(a trailing "?" marks the column nullable) and optionally a `ref` naming
the table whose keys the column's cells must hit. Cells are plain JSON
scalars — int for id/int, str for string (datetime cells hold ISO-8601
strings), bool for bool, None only in nullable columns.

Everything is immutable; operations hand back a fresh Database sharing
unchanged tables.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import SchemakitError
from .types import DateTimeVal

CELL_TYPES = ("id", "int", "string", "bool", "datetime")


class IntegrityError(SchemakitError):
    code = "integrity"


class DanglingReference(SchemakitError):
    code = "dangling-reference"


class UnknownId(SchemakitError):
    code = "unknown-id"


@dataclass(frozen=True)
class Column:
    name: str
    type: str  # e.g. "string", "datetime?", "id"
    ref: str | None = None

    @property
    def base_type(self) -> str:
        return self.type[:-1] if self.type.endswith("?") else self.type

    @property
    def optional(self) -> bool:
        return self.type.endswith("?")


@dataclass(frozen=True)
class Table:
    key: str
    columns: tuple  # of Column
    rows: tuple  # of tuple of cells

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))

    def col_index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise IntegrityError(f"no column {name!r}")

    def column(self, name: str) -> Column:
        return self.columns[self.col_index(name)]

    @property
    def key_index(self) -> int:
        return self.col_index(self.key)

    def keys(self) -> tuple:
        ki = self.key_index
        return tuple(r[ki] for r in self.rows)

    def row_by_key(self, key):
        ki = self.key_index
        for r in self.rows:
            if r[ki] == key:
                return r
        raise UnknownId(f"no row with key {key!r}")

    def next_key(self) -> int:
        ks = [k for k in self.keys() if isinstance(k, int)]
        return (max(ks) + 1) if ks else 1


@dataclass(frozen=True)
class Database:
    tables: tuple = ()  # of (name, Table)

    def __post_init__(self):
        object.__setattr__(self, "tables", tuple((n, t) for n, t in self.tables))

    def names(self) -> tuple:
        return tuple(n for n, _ in self.tables)

    def table(self, name: str) -> Table:
        for n, t in self.tables:
            if n == name:
                return t
        raise IntegrityError(f"no table {name!r}")

    def has(self, name: str) -> bool:
        return name in self.names()

    def with_table(self, name: str, table: Table) -> "Database":
        if self.has(name):
            return Database(
                tuple((n, table if n == name else t) for n, t in self.tables)
            )
        return Database(self.tables + ((name, table),))

    def without(self, name: str) -> "Database":
        return Database(tuple((n, t) for n, t in self.tables if n != name))


def _check_cell(cell, col: Column, where: str) -> None:
    if cell is None:
        if not col.optional:
            raise IntegrityError(f"null in non-nullable column {where}")
        return
    base = col.base_type
    if base in ("id", "int"):
        if not isinstance(cell, int) or isinstance(cell, bool):
            raise IntegrityError(f"expected an integer in {where}, got {cell!r}")
    elif base == "string":
        if not isinstance(cell, str):
            raise IntegrityError(f"expected a string in {where}, got {cell!r}")
    elif base == "bool":
        if not isinstance(cell, bool):
            raise IntegrityError(f"expected a bool in {where}, got {cell!r}")
    elif base == "datetime":
        if not isinstance(cell, str):
            raise IntegrityError(f"expected an ISO date in {where}, got {cell!r}")
        try:
            DateTimeVal.parse(cell)
        except ValueError:
            raise IntegrityError(f"bad ISO date {cell!r} in {where}") from None
    else:
        raise IntegrityError(f"unknown column type {col.type!r} in {where}")


def check_integrity(db: Database) -> None:
    """Keys unique and typed id, cells well-typed, references resolve."""
    for name, table in db.tables:
        names = [c.name for c in table.columns]
        if len(set(names)) != len(names):
            raise IntegrityError(f"duplicate column names in {name!r}")
        if table.key not in names:
            raise IntegrityError(f"key column {table.key!r} missing in {name!r}")
        if table.column(table.key).type != "id":
            raise IntegrityError(f"key column of {name!r} must have type id")
        for c in table.columns:
            if c.base_type not in CELL_TYPES:
                raise IntegrityError(f"unknown column type {c.type!r} in {name!r}")
            if c.ref is not None and not db.has(c.ref):
                raise DanglingReference(
                    f"{name}.{c.name} references missing table {c.ref!r}"
                )
        seen = set()
        for r, row in enumerate(table.rows):
            if len(row) != len(table.columns):
                raise IntegrityError(f"row {r} of {name!r} has wrong arity")
            for c, cell in zip(table.columns, row):
                _check_cell(cell, c, f"{name}.{c.name} row {r}")
                if c.ref is not None and cell is not None:
                    if cell not in db.table(c.ref).keys():
                        raise DanglingReference(
                            f"{name}.{c.name} row {r} references "
                            f"missing {c.ref} key {cell!r}"
                        )
            k = row[table.key_index]
            if k in seen:
                raise IntegrityError(f"duplicate key {k!r} in {name!r}")
            seen.add(k)


def insert_row(db: Database, table_name: str, cells: dict) -> Database:
    """Insert one row given as a column->cell mapping; missing nullable -> None."""
    t = db.table(table_name)
    row = []
    for c in t.columns:
        if c.name in cells:
            row.append(cells[c.name])
        elif c.optional:
            row.append(None)
        else:
            raise IntegrityError(f"missing value for {table_name}.{c.name}")
    extra = set(cells) - {c.name for c in t.columns}
    if extra:
        raise IntegrityError(f"unknown column(s) {sorted(extra)} for {table_name!r}")
    out = db.with_table(table_name, Table(t.key, t.columns, t.rows + (tuple(row),)))
    check_integrity(out)
    return out


def set_cell(db: Database, table_name: str, key, column: str, value) -> Database:
    t = db.table(table_name)
    ci, ki = t.col_index(column), t.key_index
    if key not in t.keys():
        raise UnknownId(f"no row with key {key!r} in {table_name!r}")
    rows = tuple(
        tuple(value if i == ci else cell for i, cell in enumerate(r))
        if r[ki] == key
        else r
        for r in t.rows
    )
    out = db.with_table(table_name, Table(t.key, t.columns, rows))
    check_integrity(out)
    return out


def referencing_columns(db: Database, target: str) -> list:
    """All (table_name, column_name) pairs whose ref points at `target`."""
    out = []
    for name, table in db.tables:
        for c in table.columns:
            if c.ref == target:
                out.append((name, c.name))
    return out


# ---------------------------------------------------------------------------
# JSON


def db_to_obj(db: Database):
    tables = {}
    for name, t in db.tables:
        cols = []
        for c in t.columns:
            obj = {"name": c.name, "type": c.type}
            if c.ref is not None:
                obj["ref"] = c.ref
            cols.append(obj)
        tables[name] = {
            "key": t.key,
            "columns": cols,
            "rows": [list(r) for r in t.rows],
        }
    return {"tables": tables}


def db_from_obj(obj) -> Database:
    tables = []
    for name, t in obj["tables"].items():
        cols = tuple(
            Column(c["name"], c["type"], c.get("ref")) for c in t["columns"]
        )
        tables.append((name, Table(t["key"], cols, tuple(tuple(r) for r in t["rows"]))))
    db = Database(tuple(tables))
    check_integrity(db)
    return db
