"""Bidirectional views between the shapes a schema evolution relates.

Two lenses cover the evolutions that actually change a value's shape:

* `ExtractEntityLens` — a flat table vs. its extracted form (source table
  with a reference column, plus the entity table). `fwd` re-extracts
  using the recorded key assignment so entity keys stay stable; `bwd`
  joins the entity back in. Anything the narrower side cannot represent
  (an entity row nobody references, a column added only to the entity
  table) comes back in a DropReport — nothing is dropped silently.

* `MultiplicityLens` — a scalar field vs. a list field on plain records
  (null ~ [], x ~ [x]). Writing a scalar back over a longer list needs a
  policy: only-new replaces the list, replace-head keeps the tail,
  prepend keeps everything.

`transport_edit` moves *edits* (not whole states) across an extract
lens, which is how a change made against one shape reaches a replica
that never left the other shape.
"""

from __future__ import annotations

from dataclasses import dataclass

from .database import Column, Database, Table, check_integrity, insert_row, set_cell
from .entity import Correspondence
from .errors import SchemakitError

WRITE_POLICIES = ("only-new", "replace-head", "prepend")


class Unsupported(SchemakitError):
    code = "unsupported"


class PolicyRequired(SchemakitError):
    code = "policy-required"


class Untransportable(SchemakitError):
    code = "untransportable"


class NonConforming(SchemakitError):
    code = "non-conforming"


def parse_policy(name: str) -> str:
    if name not in WRITE_POLICIES:
        raise PolicyRequired(
            f"unknown write policy {name!r}; pick one of {', '.join(WRITE_POLICIES)}"
        )
    return name


@dataclass(frozen=True)
class DropEntry:
    kind: str  # unreferenced-row | extra-column | list-tail | unreferenced-update
    table: str
    detail: dict

    def to_obj(self):
        return {"kind": self.kind, "table": self.table, "detail": self.detail}


@dataclass(frozen=True)
class DropReport:
    entries: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    @property
    def clean(self) -> bool:
        return not self.entries

    def to_obj(self):
        return [e.to_obj() for e in self.entries]


@dataclass(frozen=True)
class BwdResult:
    value: object  # Database or record dict
    report: DropReport


# ---------------------------------------------------------------------------
# database edits (the things transported across a lens)


@dataclass(frozen=True)
class SetCellEdit:
    table: str
    key: object
    column: str
    value: object


@dataclass(frozen=True)
class InsertRowEdit:
    table: str
    cells: tuple  # of (column, value)

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple((c, v) for c, v in self.cells))


DbEdit = SetCellEdit | InsertRowEdit


def apply_db_edit(db: Database, e) -> Database:
    if isinstance(e, SetCellEdit):
        return set_cell(db, e.table, e.key, e.column, e.value)
    if isinstance(e, InsertRowEdit):
        return insert_row(db, e.table, dict(e.cells))
    raise TypeError(f"not a database edit: {e!r}")


def db_edit_to_obj(e) -> dict:
    if isinstance(e, SetCellEdit):
        return {
            "op": "set-cell",
            "table": e.table,
            "key": e.key,
            "column": e.column,
            "value": e.value,
        }
    return {"op": "insert-row", "table": e.table, "cells": dict(e.cells)}


def db_edit_from_obj(obj):
    if obj["op"] == "set-cell":
        return SetCellEdit(obj["table"], obj["key"], obj["column"], obj["value"])
    if obj["op"] == "insert-row":
        return InsertRowEdit(obj["table"], tuple(obj["cells"].items()))
    raise SchemakitError(f"unknown database edit {obj['op']!r}")


# ---------------------------------------------------------------------------
# extract-entity lens


class ExtractEntityLens:
    """flat database <-> (source + entity) database, from a recorded
    correspondence. Oriented so fwd always goes flat -> extracted."""

    def __init__(self, corr: Correspondence):
        if corr.op == "absorb-entity":
            corr = corr.inverse()
        self.corr = corr

    # -- helpers

    def _spec(self):
        return self.corr.spec

    def _flat_layout(self, db: Database) -> Table:
        spec = self._spec()
        if not db.has(spec.source):
            raise NonConforming(f"no table {spec.source!r}")
        t = db.table(spec.source)
        names = tuple(c.name for c in t.columns)
        if names != tuple(self.corr.source_columns):
            raise NonConforming(
                f"{spec.source!r} does not have the recorded flat layout",
                expected=list(self.corr.source_columns),
                got=list(names),
            )
        return t

    def _extracted_layout(self, db: Database):
        spec = self._spec()
        if not db.has(spec.source) or not db.has(spec.new_table):
            raise NonConforming(
                f"expected tables {spec.source!r} and {spec.new_table!r}"
            )
        src, ent = db.table(spec.source), db.table(spec.new_table)
        if spec.fk not in (c.name for c in src.columns):
            raise NonConforming(f"{spec.source!r} has no reference column {spec.fk!r}")
        for name in (spec.new_key,) + tuple(spec.columns):
            if name not in (c.name for c in ent.columns):
                raise NonConforming(f"{spec.new_table!r} has no column {name!r}")
        return src, ent

    # -- directions

    def fwd(self, db: Database) -> Database:
        """Re-extract, keeping the recorded keys; unseen attribute tuples
        get the next keys in first-appearance order."""
        spec = self._spec()
        flat = self._flat_layout(db)
        extracted_idx = [flat.col_index(n) for n in spec.columns]
        keep_idx = [i for i, c in enumerate(flat.columns) if c.name not in spec.columns]

        assignment = list(self.corr.assignment)
        used = [k for _, k in assignment]
        fresh = (max(used) + 1) if used else 1
        fk_cells, ordered = [], []
        for row in flat.rows:
            attrs = tuple(row[i] for i in extracted_idx)
            key = next((k for a, k in assignment if a == attrs), None)
            if key is None:
                key = fresh
                fresh += 1
                assignment.append((attrs, key))
            if key not in ordered:
                ordered.append(key)
            fk_cells.append(key)

        ent_cols = (Column(spec.new_key, "id"),) + tuple(
            Column(flat.columns[i].name, flat.columns[i].type, flat.columns[i].ref)
            for i in extracted_idx
        )
        by_key = dict((k, a) for a, k in assignment)
        ent_rows = tuple((k,) + tuple(by_key[k]) for k in ordered)
        src_cols = tuple(flat.columns[i] for i in keep_idx) + (
            Column(spec.fk, "id", ref=spec.new_table),
        )
        src_rows = tuple(
            tuple(row[i] for i in keep_idx) + (fk,)
            for row, fk in zip(flat.rows, fk_cells)
        )
        out = db.with_table(spec.source, Table(flat.key, src_cols, src_rows)).with_table(
            spec.new_table, Table(spec.new_key, ent_cols, ent_rows)
        )
        check_integrity(out)
        return out

    def bwd(self, db: Database) -> BwdResult:
        """Join the entity back in, restoring the recorded column order.
        Entity rows nobody references and entity-only columns are
        reported dropped."""
        spec = self._spec()
        src, ent = self._extracted_layout(db)
        fk_idx = src.col_index(spec.fk)
        attr_idx = {n: ent.col_index(n) for n in spec.columns}

        flat_cols, drops = [], []
        for name in self.corr.source_columns:
            if name in spec.columns:
                flat_cols.append(ent.columns[attr_idx[name]])
            else:
                flat_cols.append(src.column(name))

        flat_rows = []
        for row in src.rows:
            ent_row = ent.row_by_key(row[fk_idx])  # raises UnknownId if dangling
            cells = []
            for name in self.corr.source_columns:
                if name in spec.columns:
                    cells.append(ent_row[attr_idx[name]])
                else:
                    cells.append(row[src.col_index(name)])
            flat_rows.append(tuple(cells))

        referenced = {row[fk_idx] for row in src.rows}
        ent_key_idx = ent.key_index
        for row in ent.rows:
            if row[ent_key_idx] not in referenced:
                drops.append(
                    DropEntry(
                        "unreferenced-row",
                        spec.new_table,
                        {"key": row[ent_key_idx], "cells": list(row)},
                    )
                )
        expected = {spec.new_key} | set(spec.columns)
        for c in ent.columns:
            if c.name not in expected:
                drops.append(
                    DropEntry("extra-column", spec.new_table, {"column": c.name})
                )

        out = db.without(spec.new_table).with_table(
            spec.source, Table(src.key, tuple(flat_cols), tuple(flat_rows))
        )
        check_integrity(out)
        return BwdResult(out, DropReport(tuple(drops)))


# ---------------------------------------------------------------------------
# multiplicity lens


@dataclass(frozen=True)
class MultiplicityChange:
    """A field turned from optional scalar into a list (or back)."""

    scalar_field: str
    list_field: str


class MultiplicityLens:
    """record with scalar field <-> record with list field.

    null ~ [], x ~ [x]. The list side is wider; what its tail holds is
    what write policies are about.
    """

    def __init__(self, scalar_field: str, list_field: str):
        self.scalar_field = scalar_field
        self.list_field = list_field

    def _swap(self, rec: dict, drop: str, add: str, value) -> dict:
        if drop not in rec:
            raise NonConforming(f"record has no field {drop!r}")
        return {(add if k == drop else k): (value if k == drop else v) for k, v in rec.items()}

    def fwd(self, rec: dict) -> dict:
        v = rec.get(self.scalar_field)
        if self.scalar_field not in rec:
            raise NonConforming(f"record has no field {self.scalar_field!r}")
        return self._swap(rec, self.scalar_field, self.list_field, [] if v is None else [v])

    def bwd(self, rec: dict) -> BwdResult:
        if self.list_field not in rec:
            raise NonConforming(f"record has no field {self.list_field!r}")
        lst = list(rec[self.list_field])
        head = lst[0] if lst else None
        drops = ()
        if len(lst) > 1:
            drops = (
                DropEntry("list-tail", self.list_field, {"values": lst[1:]}),
            )
        return BwdResult(
            self._swap(rec, self.list_field, self.scalar_field, head),
            DropReport(drops),
        )

    def putback(self, write: dict, current: dict, policy: str | None) -> dict:
        """Apply a scalar-side write to the list-side record without
        forgetting more than the policy allows.

        A write equal to the current head is a no-op; a null write means
        "no value" and empties the list under every policy."""
        if policy is None:
            raise PolicyRequired("a write policy is needed to put a scalar back")
        policy = parse_policy(policy)
        if self.scalar_field not in write or self.list_field not in current:
            raise NonConforming("records do not match the lens's two shapes")
        v = write[self.scalar_field]
        lst = list(current[self.list_field])

        if v is None:
            new_list = []
        elif lst and lst[0] == v:
            new_list = lst
        elif policy == "only-new":
            new_list = [v]
        elif policy == "replace-head":
            new_list = [v] + lst[1:]
        else:  # prepend
            new_list = [v] + lst

        out = dict(current)
        for k, val in write.items():
            if k != self.scalar_field:
                out[k] = val
        out[self.list_field] = new_list
        return out


def lens_for(op):
    """The lens a recorded evolution induces, if any."""
    if isinstance(op, Correspondence):
        return ExtractEntityLens(op)
    if isinstance(op, MultiplicityChange):
        return MultiplicityLens(op.scalar_field, op.list_field)
    raise Unsupported(
        f"no state-based lens for {type(op).__name__}; replay the edit instead"
    )


# ---------------------------------------------------------------------------
# edit transport across an extract lens


def transport_edit(edit, lens, direction, db=None, target_db=None):
    """Carry a database edit across an ExtractEntityLens.

    direction "fwd": the edit was written against the flat shape, the
    result applies to the extracted shape. "bwd" is the reverse. `db` is
    the database the edit was written against (needed whenever the
    rewrite must look a row up); `target_db` is the database the result
    will apply to (needed to allocate fresh entity keys).

    Returns (edits, DropReport): possibly several edits (a shared entity
    update fans out to every flat row showing it), possibly none — and
    then the report says what stayed behind.
    """
    if not isinstance(lens, ExtractEntityLens):
        raise Unsupported("edit transport is defined for extract lenses")
    if direction not in ("fwd", "bwd"):
        raise SchemakitError(f"bad direction {direction!r}")
    spec = lens.corr.spec
    moved = tuple(spec.columns)

    if direction == "bwd":
        return _transport_bwd(edit, lens, spec, moved, db)
    return _transport_fwd(edit, lens, spec, moved, db, target_db)


def _need(db, why):
    if db is None:
        raise Untransportable(f"transport needs {why}")
    return db


def _transport_bwd(edit, lens, spec, moved, db):
    no_drops = DropReport()

    if isinstance(edit, InsertRowEdit) and edit.table == spec.source:
        cells = dict(edit.cells)
        if spec.fk not in cells:
            raise Untransportable(f"insert into {spec.source!r} carries no {spec.fk!r}")
        db = _need(db, "the extracted database, to look the entity row up")
        ent = db.table(spec.new_table)
        ent_row = ent.row_by_key(cells.pop(spec.fk))
        flat_cells = tuple(
            (name, ent_row[ent.col_index(name)] if name in moved else cells.get(name))
            for name in lens.corr.source_columns
        )
        return (InsertRowEdit(spec.source, flat_cells),), no_drops

    if isinstance(edit, SetCellEdit) and edit.table == spec.new_table:
        if edit.column == spec.new_key:
            raise Untransportable("entity keys do not exist on the flat side")
        if edit.column not in moved:
            return (), DropReport(
                (
                    DropEntry(
                        "extra-column",
                        spec.new_table,
                        {"column": edit.column, "key": edit.key, "value": edit.value},
                    ),
                )
            )
        db = _need(db, "the extracted database, to find the referencing rows")
        src = db.table(spec.source)
        fk_idx, key_idx = src.col_index(spec.fk), src.key_index
        hits = [row[key_idx] for row in src.rows if row[fk_idx] == edit.key]
        if not hits:
            return (), DropReport(
                (
                    DropEntry(
                        "unreferenced-update",
                        spec.new_table,
                        {"key": edit.key, "column": edit.column, "value": edit.value},
                    ),
                )
            )
        return (
            tuple(SetCellEdit(spec.source, k, edit.column, edit.value) for k in hits),
            no_drops,
        )

    if isinstance(edit, InsertRowEdit) and edit.table == spec.new_table:
        cells = dict(edit.cells)
        return (), DropReport(
            (DropEntry("unreferenced-row", spec.new_table, {"cells": cells}),)
        )

    if isinstance(edit, SetCellEdit) and edit.table == spec.source:
        if edit.column == spec.fk:
            # repointing a row = rewriting its attribute cells, flat-side
            db = _need(db, "the extracted database, to read the new entity row")
            ent = db.table(spec.new_table)
            ent_row = ent.row_by_key(edit.value)
            return (
                tuple(
                    SetCellEdit(spec.source, edit.key, n, ent_row[ent.col_index(n)])
                    for n in moved
                ),
                no_drops,
            )
        return (edit,), no_drops

    return (edit,), no_drops  # tables the lens does not touch pass through


def _transport_fwd(edit, lens, spec, moved, db, target_db):
    no_drops = DropReport()

    if isinstance(edit, SetCellEdit) and edit.table == spec.source:
        if edit.column not in moved:
            return (edit,), no_drops
        db = _need(db, "the flat database, to identify the entity")
        flat = db.table(spec.source)
        row = flat.row_by_key(edit.key)
        attrs = tuple(row[flat.col_index(n)] for n in moved)
        key = lens.corr.key_for(attrs)
        if key is None and target_db is not None:
            ent = target_db.table(spec.new_table)
            ki = ent.key_index
            for ent_row in ent.rows:
                if tuple(ent_row[ent.col_index(n)] for n in moved) == attrs:
                    key = ent_row[ki]
                    break
        if key is None:
            raise Untransportable(
                f"no entity row matches the edited {spec.source!r} row"
            )
        return (SetCellEdit(spec.new_table, key, edit.column, edit.value),), no_drops

    if isinstance(edit, InsertRowEdit) and edit.table == spec.source:
        cells = dict(edit.cells)
        attrs = tuple(cells.get(n) for n in moved)
        key = lens.corr.key_for(attrs)
        out = []
        if key is None and target_db is not None:
            ent = target_db.table(spec.new_table)
            ki = ent.key_index
            for ent_row in ent.rows:
                if tuple(ent_row[ent.col_index(n)] for n in moved) == attrs:
                    key = ent_row[ki]
                    break
        if key is None:
            target_db = _need(target_db, "the extracted database, to pick a fresh key")
            key = target_db.table(spec.new_table).next_key()
            out.append(
                InsertRowEdit(
                    spec.new_table,
                    ((spec.new_key, key),) + tuple((n, cells.get(n)) for n in moved),
                )
            )
        kept = tuple(
            (name, cells.get(name))
            for name in lens.corr.source_columns
            if name not in moved
        )
        out.append(InsertRowEdit(spec.source, kept + ((spec.fk, key),)))
        return tuple(out), no_drops

    if isinstance(edit, (SetCellEdit, InsertRowEdit)) and edit.table == spec.new_table:
        raise Untransportable(f"{spec.new_table!r} does not exist on the flat side")

    return (edit,), no_drops
