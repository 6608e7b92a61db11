"""Entity-level restructuring of keyed tables.

extract_entity pulls a column group out of a table into a new entity table:
rows are deduplicated by exact tuple equality, keys are assigned 1, 2, ...
in order of first appearance, and the source keeps a reference column. The
returned Correspondence records the spec, the original column layout, and
the key assignment, which is what query rewriting and the bidirectional
lens replay later.

absorb_entity is the inverse (join mode): the referenced row's attributes
are spliced back in place of the reference column and the entity table is
dropped. merge_entities collapses duplicate entities onto the first key,
rewriting every reference in the database. split_entity clones an entity
under a fresh key and repoints the referencing rows named by the caller's
reassignment — there is no safe default, so batch mode refuses.
"""

from __future__ import annotations

from dataclasses import dataclass

from .database import (
    Column,
    DanglingReference,
    Database,
    Table,
    UnknownId,
    check_integrity,
    referencing_columns,
)
from .errors import NotInteractive, SchemakitError


class SpecInvalid(SchemakitError):
    code = "spec-invalid"


@dataclass(frozen=True)
class ExtractSpec:
    source: str
    columns: tuple  # column names to extract, in new-table order
    new_table: str
    new_key: str
    fk: str

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))


@dataclass(frozen=True)
class Correspondence:
    """Record of an applied evolution: what happened plus the key assignment."""

    op: str  # "extract-entity" | "absorb-entity"
    spec: ExtractSpec
    assignment: tuple  # of (attr tuple, key)
    source_columns: tuple = ()  # source column order before the evolution

    def __post_init__(self):
        object.__setattr__(
            self, "assignment", tuple((tuple(a), k) for a, k in self.assignment)
        )
        object.__setattr__(self, "source_columns", tuple(self.source_columns))

    def inverse(self) -> "Correspondence":
        flipped = {"extract-entity": "absorb-entity", "absorb-entity": "extract-entity"}
        return Correspondence(
            flipped[self.op], self.spec, self.assignment, self.source_columns
        )

    def key_for(self, attrs: tuple):
        for a, k in self.assignment:
            if a == tuple(attrs):
                return k
        return None

    def attrs_for(self, key):
        for a, k in self.assignment:
            if k == key:
                return a
        return None


def extract_entity(db: Database, spec: ExtractSpec) -> tuple:
    """Returns (new database, correspondence)."""
    if not db.has(spec.source):
        raise SpecInvalid(f"no source table {spec.source!r}")
    src = db.table(spec.source)
    col_names = [c.name for c in src.columns]
    if db.has(spec.new_table):
        raise SpecInvalid(f"table {spec.new_table!r} already exists")
    if not spec.columns:
        raise SpecInvalid("nothing to extract")
    if len(set(spec.columns)) != len(spec.columns):
        raise SpecInvalid("duplicate columns in the extract spec")
    for name in spec.columns:
        if name not in col_names:
            raise SpecInvalid(f"no column {name!r} in {spec.source!r}")
        if name == src.key:
            raise SpecInvalid("cannot extract the source key column")
    if spec.fk in col_names:
        raise SpecInvalid(f"reference column name {spec.fk!r} collides")
    if spec.new_key in spec.columns:
        raise SpecInvalid(f"key name {spec.new_key!r} collides with an extracted column")

    extracted_idx = [src.col_index(n) for n in spec.columns]
    keep_idx = [
        i for i, c in enumerate(src.columns) if c.name not in spec.columns
    ]

    assignment = []  # (attrs, key) in first-appearance order
    fk_cells = []
    for row in src.rows:
        attrs = tuple(row[i] for i in extracted_idx)
        key = next((k for a, k in assignment if a == attrs), None)
        if key is None:
            key = len(assignment) + 1
            assignment.append((attrs, key))
        fk_cells.append(key)

    new_cols = (Column(spec.new_key, "id"),) + tuple(
        Column(src.columns[i].name, src.columns[i].type, src.columns[i].ref)
        for i in extracted_idx
    )
    new_rows = tuple((k,) + a for a, k in assignment)
    entity = Table(spec.new_key, new_cols, new_rows)

    src_cols = tuple(src.columns[i] for i in keep_idx) + (
        Column(spec.fk, "id", ref=spec.new_table),
    )
    src_rows = tuple(
        tuple(row[i] for i in keep_idx) + (fk,)
        for row, fk in zip(src.rows, fk_cells)
    )
    out = db.with_table(spec.source, Table(src.key, src_cols, src_rows)).with_table(
        spec.new_table, entity
    )
    check_integrity(out)
    corr = Correspondence(
        "extract-entity", spec, tuple(assignment), tuple(col_names)
    )
    return out, corr


def absorb_entity(db: Database, table: str, fk: str) -> Database:
    """Fold the entity `table` back into the one table referencing it via `fk`."""
    if not db.has(table):
        raise SpecInvalid(f"no table {table!r}")
    sources = [
        (name, t)
        for name, t in db.tables
        if name != table
        and any(c.name == fk and c.ref == table for c in t.columns)
    ]
    if not sources:
        raise SpecInvalid(f"no table references {table!r} via {fk!r}")
    if len(sources) > 1:
        raise SpecInvalid(
            f"ambiguous: {[n for n, _ in sources]} all reference {table!r} via {fk!r}"
        )
    others = [
        (n, c) for n, c in referencing_columns(db, table) if (n, c) != (sources[0][0], fk)
    ]
    if others:
        raise SpecInvalid(f"cannot absorb {table!r}: still referenced by {others}")

    src_name, src = sources[0]
    target = db.table(table)
    fk_idx = src.col_index(fk)
    attr_cols = tuple(c for c in target.columns if c.name != target.key)
    attr_idx = [target.col_index(c.name) for c in attr_cols]

    for c in attr_cols:
        if c.name in (x.name for x in src.columns):
            raise SpecInvalid(f"column {c.name!r} already exists in {src_name!r}")

    new_cols = (
        src.columns[:fk_idx] + attr_cols + src.columns[fk_idx + 1 :]
    )
    new_rows = []
    for row in src.rows:
        key = row[fk_idx]
        if key is None:
            raise DanglingReference(f"null reference in {src_name}.{fk}")
        target_row = target.row_by_key(key)
        attrs = tuple(target_row[i] for i in attr_idx)
        new_rows.append(row[:fk_idx] + attrs + row[fk_idx + 1 :])

    out = db.with_table(
        src_name, Table(src.key, new_cols, tuple(new_rows))
    ).without(table)
    check_integrity(out)
    return out


def merge_entities(db: Database, table: str, keys, resolution: dict | None = None) -> Database:
    """Collapse the rows named by `keys` onto the first; rewrite all references.

    `resolution` optionally sets attribute cells on the surviving row;
    without it the survivor's values stand (keep-first).
    """
    t = db.table(table)
    keys = list(keys)
    if not keys:
        raise SpecInvalid("a merge needs at least one key")
    existing = t.keys()
    for k in keys:
        if k not in existing:
            raise UnknownId(f"no row with key {k!r} in {table!r}")
    if len(set(keys)) != len(keys):
        raise SpecInvalid("duplicate keys in the merge set")
    survivor, goners = keys[0], set(keys[1:])

    ki = t.key_index
    rows = []
    for row in t.rows:
        if row[ki] in goners:
            continue
        if row[ki] == survivor and resolution:
            row = tuple(
                resolution.get(c.name, cell) for c, cell in zip(t.columns, row)
            )
        rows.append(row)
    out = db.with_table(table, Table(t.key, t.columns, tuple(rows)))

    for ref_table, ref_col in referencing_columns(db, table):
        rt = out.table(ref_table)
        ci = rt.col_index(ref_col)
        rt_rows = tuple(
            tuple(survivor if i == ci and cell in goners else cell
                  for i, cell in enumerate(row))
            for row in rt.rows
        )
        out = out.with_table(ref_table, Table(rt.key, rt.columns, rt_rows))
    check_integrity(out)
    return out


def referencing_rows(db: Database, table: str, key) -> list:
    """All (ref_table, row_key, ref_col) triples pointing at table/key."""
    out = []
    for ref_table, ref_col in referencing_columns(db, table):
        rt = db.table(ref_table)
        ci, ki = rt.col_index(ref_col), rt.key_index
        for row in rt.rows:
            if row[ci] == key:
                out.append((ref_table, row[ki], ref_col))
    return out


def split_entity(
    db: Database,
    table: str,
    key,
    reassignment: dict | None = None,
) -> Database:
    """Clone the row under a fresh sequential key; repoint the references
    marked "new" in `reassignment` (a {(ref_table, row_key): "old"|"new"} map).

    Guided only: with no reassignment there is nothing safe to do in batch.
    """
    t = db.table(table)
    if key not in t.keys():
        raise UnknownId(f"no row with key {key!r} in {table!r}")
    refs = referencing_rows(db, table, key)
    if reassignment is None:
        raise NotInteractive(
            f"splitting {table!r} key {key!r} needs a reassignment for "
            f"{len(refs)} referencing row(s)",
            referencing=[[rt, rk] for rt, rk, _ in refs],
        )
    valid = {(rt, rk) for rt, rk, _ in refs}
    for where, choice in reassignment.items():
        if tuple(where) not in valid:
            raise SpecInvalid(f"reassignment names a non-referencing row {where!r}")
        if choice not in ("old", "new"):
            raise SpecInvalid(f"reassignment choice must be old/new, got {choice!r}")

    new_key = t.next_key()
    ki = t.key_index
    source_row = t.row_by_key(key)
    clone = tuple(new_key if i == ki else cell for i, cell in enumerate(source_row))
    out = db.with_table(table, Table(t.key, t.columns, t.rows + (clone,)))

    for ref_table, row_key, ref_col in refs:
        if reassignment.get((ref_table, row_key)) == "new":
            rt = out.table(ref_table)
            ci, rki = rt.col_index(ref_col), rt.key_index
            rows = tuple(
                tuple(new_key if i == ci else cell for i, cell in enumerate(row))
                if row[rki] == row_key
                else row
                for row in rt.rows
            )
            out = out.with_table(ref_table, Table(rt.key, rt.columns, rows))
    check_integrity(out)
    return out


# ---------------------------------------------------------------------------
# JSON


def spec_to_obj(spec: ExtractSpec):
    return {
        "source": spec.source,
        "columns": list(spec.columns),
        "table": spec.new_table,
        "key": spec.new_key,
        "fk": spec.fk,
    }


def spec_from_obj(obj) -> ExtractSpec:
    return ExtractSpec(
        obj["source"], tuple(obj["columns"]), obj["table"], obj["key"], obj["fk"]
    )


def corr_to_obj(corr: Correspondence):
    return {
        "op": corr.op,
        "spec": spec_to_obj(corr.spec),
        "assignment": [[list(a), k] for a, k in corr.assignment],
        "source-columns": list(corr.source_columns),
    }


def corr_from_obj(obj) -> Correspondence:
    return Correspondence(
        obj["op"],
        spec_from_obj(obj["spec"]),
        tuple((tuple(a), k) for a, k in obj["assignment"]),
        tuple(obj.get("source-columns", ())),
    )
