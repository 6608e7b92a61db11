"""Structural type language, typed values, and type edits.

Types are plain immutable trees: primitives (bool, int, string, datetime,
id), Option, List, Record (ordered fields), Variant (ordered cases carrying
payload tuples), and Named references into an alias table. Two types are
equal iff they are structurally identical, including field and case order.

Values mirror the types one-for-one. Option values are explicit: NONE or
SomeVal(x) — a bare x never conforms to option<T>.

Edits address a record or variant inside a type by a path: a tuple whose
steps are a field label, "[]" (list element), "?" (option content), or
"label@i" (variant payload slot). Paths never look through Named aliases;
an alias is edited at its definition.

`type_diff` produces an edit script whose replay over the old type yields
the new one, for any pair. It never guesses renames: a label that vanished
while another appeared is reported as remove+add with an `ambiguous-rename`
flag, unless an explicit rename directive pairs them up.
"""

from __future__ import annotations

import datetime as _dt
import json
import re
from dataclasses import dataclass, field

from .errors import SchemakitError

PRIM_NAMES = ("bool", "int", "string", "datetime", "id")


class UnknownAlias(SchemakitError):
    code = "unknown-alias"


class PathNotFound(SchemakitError):
    code = "path-not-found"


class DuplicateLabel(SchemakitError):
    code = "duplicate-label"


class InvalidEdit(SchemakitError):
    code = "invalid-edit"


class BadDirective(SchemakitError):
    code = "bad-directive"


# ---------------------------------------------------------------------------
# type expressions


@dataclass(frozen=True)
class Prim:
    name: str

    def __post_init__(self):
        if self.name not in PRIM_NAMES:
            raise InvalidEdit(f"unknown primitive type {self.name!r}")


@dataclass(frozen=True)
class Option:
    inner: "TypeExpr"


@dataclass(frozen=True)
class ListOf:
    inner: "TypeExpr"


@dataclass(frozen=True)
class Record:
    fields: tuple  # of (label, TypeExpr)

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple((l, t) for l, t in self.fields))
        seen = set()
        for l, _ in self.fields:
            if l in seen:
                raise DuplicateLabel(f"duplicate field label {l!r}")
            seen.add(l)

    def labels(self) -> tuple:
        return tuple(l for l, _ in self.fields)

    def field_type(self, label: str) -> "TypeExpr":
        for l, t in self.fields:
            if l == label:
                return t
        raise PathNotFound(f"no field {label!r}")


@dataclass(frozen=True)
class Variant:
    cases: tuple  # of (label, tuple of TypeExpr)

    def __post_init__(self):
        object.__setattr__(
            self, "cases", tuple((l, tuple(p)) for l, p in self.cases)
        )
        seen = set()
        for l, _ in self.cases:
            if l in seen:
                raise DuplicateLabel(f"duplicate case label {l!r}")
            seen.add(l)

    def labels(self) -> tuple:
        return tuple(l for l, _ in self.cases)

    def payload(self, label: str) -> tuple:
        for l, p in self.cases:
            if l == label:
                return p
        raise PathNotFound(f"no case {label!r}")


@dataclass(frozen=True)
class Named:
    alias: str


TypeExpr = Prim | Option | ListOf | Record | Variant | Named

BOOL = Prim("bool")
INT = Prim("int")
STRING = Prim("string")
DATETIME = Prim("datetime")
ID = Prim("id")


def resolve(t: TypeExpr, defs: dict) -> TypeExpr:
    """Chase Named references until a structural type appears."""
    seen = []
    while isinstance(t, Named):
        if t.alias not in (defs or {}):
            raise UnknownAlias(f"alias {t.alias!r} is not defined")
        if t.alias in seen:
            raise UnknownAlias(f"alias cycle through {t.alias!r}")
        seen.append(t.alias)
        t = defs[t.alias]
    return t


def check_defs(defs: dict) -> None:
    """Reject alias tables with undefined or cyclic references."""
    for name in defs:
        _walk_defs(Named(name), defs, ())


def _walk_defs(t: TypeExpr, defs: dict, stack: tuple) -> None:
    if isinstance(t, Named):
        if t.alias in stack:
            raise UnknownAlias(f"alias cycle through {t.alias!r}")
        if t.alias not in defs:
            raise UnknownAlias(f"alias {t.alias!r} is not defined")
        _walk_defs(defs[t.alias], defs, stack + (t.alias,))
    elif isinstance(t, (Option, ListOf)):
        _walk_defs(t.inner, defs, stack)
    elif isinstance(t, Record):
        for _, ft in t.fields:
            _walk_defs(ft, defs, stack)
    elif isinstance(t, Variant):
        for _, payload in t.cases:
            for pt in payload:
                _walk_defs(pt, defs, stack)


# ---------------------------------------------------------------------------
# values


@dataclass(frozen=True)
class BoolVal:
    value: bool


@dataclass(frozen=True)
class IntVal:
    value: int


@dataclass(frozen=True)
class StrVal:
    value: str


@dataclass(frozen=True)
class DateTimeVal:
    """Calendar date plus optional time of day, printed ISO-8601."""

    date: _dt.date
    time: _dt.time | None = None

    def isoformat(self) -> str:
        if self.time is None:
            return self.date.isoformat()
        return f"{self.date.isoformat()}T{self.time.isoformat()}"

    @classmethod
    def parse(cls, text: str) -> "DateTimeVal":
        if "T" in text:
            d, _, t = text.partition("T")
            return cls(_dt.date.fromisoformat(d), _dt.time.fromisoformat(t))
        return cls(_dt.date.fromisoformat(text))


@dataclass(frozen=True)
class IdVal:
    value: int


@dataclass(frozen=True)
class NoneVal:
    pass


NONE = NoneVal()


@dataclass(frozen=True)
class SomeVal:
    value: "Value"


@dataclass(frozen=True)
class ListVal:
    items: tuple

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))


@dataclass(frozen=True)
class RecordVal:
    fields: tuple  # of (label, Value)

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple((l, v) for l, v in self.fields))

    def labels(self) -> tuple:
        return tuple(l for l, _ in self.fields)

    def get(self, label: str) -> "Value":
        for l, v in self.fields:
            if l == label:
                return v
        raise KeyError(label)


@dataclass(frozen=True)
class VariantVal:
    label: str
    payload: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "payload", tuple(self.payload))


Value = (
    BoolVal
    | IntVal
    | StrVal
    | DateTimeVal
    | IdVal
    | NoneVal
    | SomeVal
    | ListVal
    | RecordVal
    | VariantVal
)


# ---------------------------------------------------------------------------
# conformance


@dataclass(frozen=True)
class ConformanceReport:
    violations: tuple  # of (path, message)

    @property
    def ok(self) -> bool:
        return not self.violations


def _type_name(t: TypeExpr) -> str:
    if isinstance(t, Prim):
        return t.name
    if isinstance(t, Option):
        return f"option<{_type_name(t.inner)}>"
    if isinstance(t, ListOf):
        return f"list<{_type_name(t.inner)}>"
    if isinstance(t, Record):
        return "record"
    if isinstance(t, Variant):
        return "variant"
    return t.alias


_VALUE_NAMES = {
    BoolVal: "bool",
    IntVal: "int",
    StrVal: "string",
    DateTimeVal: "datetime",
    IdVal: "id",
    NoneVal: "none",
    SomeVal: "some",
    ListVal: "list",
    RecordVal: "record",
    VariantVal: "variant",
}

_PRIM_VALUE = {
    "bool": BoolVal,
    "int": IntVal,
    "string": StrVal,
    "datetime": DateTimeVal,
    "id": IdVal,
}


def conforms(value: Value, t: TypeExpr, defs: dict | None = None) -> ConformanceReport:
    """Check a value against a type; violations carry the deepest failing path."""
    out = []
    _conforms(value, t, defs or {}, "", out)
    return ConformanceReport(tuple(out))


def _conforms(value, t, defs, path, out):
    t = resolve(t, defs)
    if isinstance(t, Prim):
        want = _PRIM_VALUE[t.name]
        if not isinstance(value, want):
            out.append((path, f"expected {t.name}, got {_VALUE_NAMES[type(value)]}"))
        elif t.name == "bool" and not isinstance(value.value, bool):
            out.append((path, "expected bool"))
        return
    if isinstance(t, Option):
        if isinstance(value, NoneVal):
            return
        if isinstance(value, SomeVal):
            _conforms(value.value, t.inner, defs, path, out)
            return
        out.append((path, f"expected {_type_name(t)}, got {_VALUE_NAMES[type(value)]}"))
        return
    if isinstance(t, ListOf):
        if not isinstance(value, ListVal):
            out.append((path, f"expected list, got {_VALUE_NAMES[type(value)]}"))
            return
        for i, item in enumerate(value.items):
            _conforms(item, t.inner, defs, f"{path}[{i}]", out)
        return
    if isinstance(t, Record):
        if not isinstance(value, RecordVal):
            out.append((path, f"expected record, got {_VALUE_NAMES[type(value)]}"))
            return
        have = {}
        for l, v in value.fields:
            if l in have:
                out.append((f"{path}.{l}", "duplicate field"))
            have[l] = v
        for l, ft in t.fields:
            if l not in have:
                out.append((f"{path}.{l}", "missing field"))
            else:
                _conforms(have[l], ft, defs, f"{path}.{l}", out)
        for l in value.labels():
            if l not in t.labels():
                out.append((f"{path}.{l}", "unexpected field"))
        return
    if isinstance(t, Variant):
        if not isinstance(value, VariantVal):
            out.append((path, f"expected variant, got {_VALUE_NAMES[type(value)]}"))
            return
        if value.label not in t.labels():
            out.append((path, f"unknown case {value.label!r}"))
            return
        payload_types = t.payload(value.label)
        if len(payload_types) != len(value.payload):
            out.append(
                (
                    path,
                    f"case {value.label!r} expects {len(payload_types)} "
                    f"payload values, got {len(value.payload)}",
                )
            )
            return
        for i, (pv, pt) in enumerate(zip(value.payload, payload_types)):
            _conforms(pv, pt, defs, f"{path}.{value.label}[{i}]", out)
        return
    raise InvalidEdit(f"unhandled type {t!r}")


# ---------------------------------------------------------------------------
# type edits

Path = tuple  # of str steps: field label | "[]" | "?" | "label@i"

_CASE_STEP = re.compile(r"^(?P<label>[^@]+)@(?P<idx>\d+)$")


@dataclass(frozen=True)
class AddField:
    path: Path
    label: str
    type: TypeExpr
    default: Value | None = None
    at: int | None = None  # insertion index; None appends


@dataclass(frozen=True)
class RemoveField:
    path: Path
    label: str


@dataclass(frozen=True)
class RenameField:
    path: Path
    old: str
    new: str


@dataclass(frozen=True)
class ChangeFieldType:
    path: Path
    label: str
    type: TypeExpr


@dataclass(frozen=True)
class AddCase:
    path: Path
    label: str
    payload: tuple = ()
    at: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "payload", tuple(self.payload))


@dataclass(frozen=True)
class RemoveCase:
    path: Path
    label: str


@dataclass(frozen=True)
class RenameCase:
    path: Path
    old: str
    new: str


@dataclass(frozen=True)
class ChangeCasePayload:
    path: Path
    label: str
    payload: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "payload", tuple(self.payload))


@dataclass(frozen=True)
class ReplaceType:
    """Wholesale replacement of the node at `path`.

    Emitted by the differ only where the finer-grained edits cannot reach:
    a constructor change at a position with no enclosing record field.
    """

    path: Path
    type: TypeExpr


TypeEdit = (
    AddField
    | RemoveField
    | RenameField
    | ChangeFieldType
    | AddCase
    | RemoveCase
    | RenameCase
    | ChangeCasePayload
    | ReplaceType
)


def _rebuild(t: TypeExpr, path: Path, fn):
    if not path:
        return fn(t)
    step, rest = path[0], path[1:]
    if step == "?" and isinstance(t, Option):
        return Option(_rebuild(t.inner, rest, fn))
    if step == "[]" and isinstance(t, ListOf):
        return ListOf(_rebuild(t.inner, rest, fn))
    m = _CASE_STEP.match(step)
    if m and isinstance(t, Variant):
        label, idx = m.group("label"), int(m.group("idx"))
        cases = []
        hit = False
        for l, payload in t.cases:
            if l == label:
                if idx >= len(payload):
                    raise PathNotFound(f"case {label!r} has no payload slot {idx}")
                payload = tuple(
                    _rebuild(pt, rest, fn) if i == idx else pt
                    for i, pt in enumerate(payload)
                )
                hit = True
            cases.append((l, payload))
        if not hit:
            raise PathNotFound(f"no case {label!r}")
        return Variant(tuple(cases))
    if isinstance(t, Record):
        fields = []
        hit = False
        for l, ft in t.fields:
            if l == step:
                ft = _rebuild(ft, rest, fn)
                hit = True
            fields.append((l, ft))
        if not hit:
            raise PathNotFound(f"no field {step!r}")
        return Record(tuple(fields))
    if isinstance(t, Named):
        raise PathNotFound(
            f"path crosses alias {t.alias!r}; edit the alias definition instead"
        )
    raise PathNotFound(f"step {step!r} does not apply to {_type_name(t)}")


def apply_type_edit(t: TypeExpr, edit: TypeEdit, defs: dict | None = None) -> TypeExpr:
    """Apply one edit, validating labels; raises PathNotFound/DuplicateLabel."""

    def on_record(node):
        if not isinstance(node, Record):
            raise PathNotFound(f"expected a record at {list(edit.path)}")
        return node

    def on_variant(node):
        if not isinstance(node, Variant):
            raise PathNotFound(f"expected a variant at {list(edit.path)}")
        return node

    if isinstance(edit, ReplaceType):
        return _rebuild(t, edit.path, lambda _node: edit.type)

    if isinstance(edit, AddField):

        def fn(node):
            node = on_record(node)
            if edit.label in node.labels():
                raise DuplicateLabel(f"field {edit.label!r} already exists")
            if edit.default is not None:
                try:
                    report = conforms(edit.default, edit.type, defs or {})
                except UnknownAlias:
                    report = None  # cannot check without the alias table
                if report is not None and not report.ok:
                    raise InvalidEdit(
                        f"default for {edit.label!r} does not conform: "
                        + "; ".join(m for _, m in report.violations)
                    )
            fields = list(node.fields)
            at = len(fields) if edit.at is None else min(edit.at, len(fields))
            fields.insert(at, (edit.label, edit.type))
            return Record(tuple(fields))

        return _rebuild(t, edit.path, fn)

    if isinstance(edit, RemoveField):

        def fn(node):
            node = on_record(node)
            if edit.label not in node.labels():
                raise PathNotFound(f"no field {edit.label!r}")
            return Record(tuple((l, ft) for l, ft in node.fields if l != edit.label))

        return _rebuild(t, edit.path, fn)

    if isinstance(edit, RenameField):

        def fn(node):
            node = on_record(node)
            if edit.old not in node.labels():
                raise PathNotFound(f"no field {edit.old!r}")
            if edit.new in node.labels():
                raise DuplicateLabel(f"field {edit.new!r} already exists")
            return Record(
                tuple(
                    (edit.new if l == edit.old else l, ft) for l, ft in node.fields
                )
            )

        return _rebuild(t, edit.path, fn)

    if isinstance(edit, ChangeFieldType):

        def fn(node):
            node = on_record(node)
            if edit.label not in node.labels():
                raise PathNotFound(f"no field {edit.label!r}")
            return Record(
                tuple(
                    (l, edit.type if l == edit.label else ft)
                    for l, ft in node.fields
                )
            )

        return _rebuild(t, edit.path, fn)

    if isinstance(edit, AddCase):

        def fn(node):
            node = on_variant(node)
            if edit.label in node.labels():
                raise DuplicateLabel(f"case {edit.label!r} already exists")
            cases = list(node.cases)
            at = len(cases) if edit.at is None else min(edit.at, len(cases))
            cases.insert(at, (edit.label, edit.payload))
            return Variant(tuple(cases))

        return _rebuild(t, edit.path, fn)

    if isinstance(edit, RemoveCase):

        def fn(node):
            node = on_variant(node)
            if edit.label not in node.labels():
                raise PathNotFound(f"no case {edit.label!r}")
            return Variant(tuple((l, p) for l, p in node.cases if l != edit.label))

        return _rebuild(t, edit.path, fn)

    if isinstance(edit, RenameCase):

        def fn(node):
            node = on_variant(node)
            if edit.old not in node.labels():
                raise PathNotFound(f"no case {edit.old!r}")
            if edit.new in node.labels():
                raise DuplicateLabel(f"case {edit.new!r} already exists")
            return Variant(
                tuple((edit.new if l == edit.old else l, p) for l, p in node.cases)
            )

        return _rebuild(t, edit.path, fn)

    if isinstance(edit, ChangeCasePayload):

        def fn(node):
            node = on_variant(node)
            if edit.label not in node.labels():
                raise PathNotFound(f"no case {edit.label!r}")
            return Variant(
                tuple(
                    (l, edit.payload if l == edit.label else p)
                    for l, p in node.cases
                )
            )

        return _rebuild(t, edit.path, fn)

    raise InvalidEdit(f"unknown edit {edit!r}")


# ---------------------------------------------------------------------------
# diffing


@dataclass(frozen=True)
class RenameDirective:
    """Explicit assertion that `old` at `path` was renamed to `new`."""

    path: Path
    old: str
    new: str
    scope: str = "field"  # or "case"


@dataclass(frozen=True)
class DiffFlag:
    kind: str  # ambiguous-rename | field-moved | case-moved
    path: Path
    detail: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "detail", tuple(self.detail))


@dataclass(frozen=True)
class DiffResult:
    edits: tuple
    flags: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "edits", tuple(self.edits))
        object.__setattr__(self, "flags", tuple(self.flags))


def type_diff(old: TypeExpr, new: TypeExpr, directives=()) -> DiffResult:
    """Edit script from old to new; total, replay-sound, rename-explicit."""
    edits, flags = [], []
    _diff_into(old, new, (), None, edits, flags, tuple(directives))
    return DiffResult(tuple(edits), tuple(flags))


def _diff_into(old, new, path, field_ctx, edits, flags, directives):
    """field_ctx is (record_path, label) when this position is a record field."""
    if old == new:
        return
    o, n, p = old, new, path
    while True:
        if isinstance(o, Option) and isinstance(n, Option):
            o, n, p = o.inner, n.inner, p + ("?",)
        elif isinstance(o, ListOf) and isinstance(n, ListOf):
            o, n, p = o.inner, n.inner, p + ("[]",)
        else:
            break
    if isinstance(o, Record) and isinstance(n, Record):
        _diff_record(o, n, p, edits, flags, directives)
        return
    if isinstance(o, Variant) and isinstance(n, Variant):
        _diff_variant(o, n, p, edits, flags, directives)
        return
    if field_ctx is not None:
        rec_path, label = field_ctx
        edits.append(ChangeFieldType(rec_path, label, new))
    else:
        edits.append(ReplaceType(path, new))


def _lis_keep(seq, rank):
    """Longest increasing subsequence of seq under rank; returns kept set."""
    if not seq:
        return set()
    best = []  # best[i] = (length, prev_index)
    for i, x in enumerate(seq):
        length, prev = 1, None
        for j in range(i):
            if rank[seq[j]] < rank[x] and best[j][0] + 1 > length:
                length, prev = best[j][0] + 1, j
        best.append((length, prev))
    i = max(range(len(seq)), key=lambda k: best[k][0])
    keep = set()
    while i is not None:
        keep.add(seq[i])
        i = best[i][1]
    return keep


def _diff_members(kind, old_members, new_members, path, edits, flags, directives):
    """Shared field/case diff. Members are (label, datum) lists.

    kind is "field" or "case"; datum is a field type or a payload tuple.
    """
    if kind == "field":
        mk_remove = lambda l: RemoveField(path, l)
        mk_rename = lambda a, b: RenameField(path, a, b)
        mk_add = lambda l, d, at: AddField(path, l, d, None, at)
        moved_flag = "field-moved"
    else:
        mk_remove = lambda l: RemoveCase(path, l)
        mk_rename = lambda a, b: RenameCase(path, a, b)
        mk_add = lambda l, d, at: AddCase(path, l, d, at)
        moved_flag = "case-moved"

    working = list(old_members)
    old_labels = [l for l, _ in working]
    new_labels = [l for l, _ in new_members]
    new_data = dict(new_members)

    for d in directives:
        if d.scope != kind or d.path != path:
            continue
        if d.old not in old_labels:
            raise BadDirective(f"{kind} {d.old!r} not present at {list(path)}")
        if d.new not in new_labels:
            raise BadDirective(f"{kind} {d.new!r} not present in the new type")
        if d.new in old_labels:
            raise BadDirective(f"{kind} {d.new!r} already exists at {list(path)}")
        edits.append(mk_rename(d.old, d.new))
        working = [(d.new if l == d.old else l, x) for l, x in working]
        old_labels = [l for l, _ in working]

    old_data = dict(working)
    removed = [l for l in old_labels if l not in new_labels]
    added = [l for l in new_labels if l not in old_labels]
    if removed and added:
        flags.append(
            DiffFlag("ambiguous-rename", path, tuple(removed) + tuple(added))
        )
    for l in removed:
        edits.append(mk_remove(l))
    cur = [l for l in old_labels if l not in removed]

    rank = {l: i for i, l in enumerate(new_labels)}
    keep = _lis_keep(cur, rank)
    moved = [l for l in cur if l not in keep]
    for l in moved:
        edits.append(mk_remove(l))
        flags.append(DiffFlag(moved_flag, path, (l,)))
    cur = [l for l in cur if l in keep]

    changed = [(l, old_data[l], new_data[l]) for l in cur if old_data[l] != new_data[l]]

    # insert missing members at their final positions, in new order
    for l in new_labels:
        if l in cur:
            continue
        at = sum(1 for c in cur if rank[c] < rank[l])
        edits.append(mk_add(l, new_data[l], at))
        cur.insert(at, l)

    return changed


def _diff_record(old, new, path, edits, flags, directives):
    changed = _diff_members(
        "field", list(old.fields), list(new.fields), path, edits, flags, directives
    )
    for label, old_t, new_t in changed:
        _diff_into(
            old_t, new_t, path + (label,), (path, label), edits, flags, directives
        )


def _diff_variant(old, new, path, edits, flags, directives):
    changed = _diff_members(
        "case", list(old.cases), list(new.cases), path, edits, flags, directives
    )
    for label, _old_p, new_p in changed:
        edits.append(ChangeCasePayload(path, label, new_p))


# ---------------------------------------------------------------------------
# alias occurrence search (used to route value migrations through aliases)


def find_alias_paths(t: TypeExpr, alias: str, defs: dict) -> list:
    """Value paths at which occurrences of Named(alias) sit inside t."""
    out = []
    _find_alias(t, alias, defs, (), out)
    return out


def _find_alias(t, alias, defs, path, out):
    if isinstance(t, Named):
        if t.alias == alias:
            out.append(path)
        return  # do not chase into other aliases
    if isinstance(t, Option):
        _find_alias(t.inner, alias, defs, path + ("?",), out)
    elif isinstance(t, ListOf):
        _find_alias(t.inner, alias, defs, path + ("[]",), out)
    elif isinstance(t, Record):
        for l, ft in t.fields:
            _find_alias(ft, alias, defs, path + (l,), out)
    elif isinstance(t, Variant):
        for l, payload in t.cases:
            for i, pt in enumerate(payload):
                _find_alias(pt, alias, defs, path + (f"{l}@{i}",), out)


# ---------------------------------------------------------------------------
# finite domains (drives mapping-totality checks)


def finite_domain(t: TypeExpr, defs: dict | None = None, limit: int = 64):
    """All values of t if there are at most `limit`, else None."""
    t = resolve(t, defs or {})
    if isinstance(t, Prim):
        if t.name == "bool":
            return [BoolVal(False), BoolVal(True)]
        return None
    if isinstance(t, Option):
        inner = finite_domain(t.inner, defs, limit - 1)
        if inner is None or len(inner) + 1 > limit:
            return None
        return [NONE] + [SomeVal(v) for v in inner]
    if isinstance(t, Variant):
        out = []
        for label, payload in t.cases:
            combos = [()]
            for pt in payload:
                dom = finite_domain(pt, defs, limit)
                if dom is None:
                    return None
                combos = [c + (v,) for c in combos for v in dom]
                if len(combos) > limit:
                    return None
            out.extend(VariantVal(label, c) for c in combos)
            if len(out) > limit:
                return None
        return out
    if isinstance(t, Record):
        combos = [()]
        for l, ft in t.fields:
            dom = finite_domain(ft, defs, limit)
            if dom is None:
                return None
            combos = [c + ((l, v),) for c in combos for v in dom]
            if len(combos) > limit:
                return None
        return [RecordVal(c) for c in combos]
    return None


# ---------------------------------------------------------------------------
# JSON serialization (canonical: sorted keys, compact separators)


def canonical_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def type_to_obj(t: TypeExpr):
    if isinstance(t, Prim):
        return {"kind": "prim", "name": t.name}
    if isinstance(t, Option):
        return {"kind": "option", "inner": type_to_obj(t.inner)}
    if isinstance(t, ListOf):
        return {"kind": "list", "inner": type_to_obj(t.inner)}
    if isinstance(t, Record):
        return {
            "kind": "record",
            "fields": [[l, type_to_obj(ft)] for l, ft in t.fields],
        }
    if isinstance(t, Variant):
        return {
            "kind": "variant",
            "cases": [[l, [type_to_obj(pt) for pt in p]] for l, p in t.cases],
        }
    if isinstance(t, Named):
        return {"kind": "named", "alias": t.alias}
    raise InvalidEdit(f"cannot serialize {t!r}")


def type_from_obj(obj) -> TypeExpr:
    kind = obj["kind"]
    if kind == "prim":
        return Prim(obj["name"])
    if kind == "option":
        return Option(type_from_obj(obj["inner"]))
    if kind == "list":
        return ListOf(type_from_obj(obj["inner"]))
    if kind == "record":
        return Record(tuple((l, type_from_obj(ft)) for l, ft in obj["fields"]))
    if kind == "variant":
        return Variant(
            tuple((l, tuple(type_from_obj(pt) for pt in p)) for l, p in obj["cases"])
        )
    if kind == "named":
        return Named(obj["alias"])
    raise InvalidEdit(f"unknown type kind {kind!r}")


def value_to_obj(v: Value):
    if isinstance(v, BoolVal):
        return {"kind": "bool", "value": v.value}
    if isinstance(v, IntVal):
        return {"kind": "int", "value": v.value}
    if isinstance(v, StrVal):
        return {"kind": "string", "value": v.value}
    if isinstance(v, DateTimeVal):
        return {"kind": "datetime", "value": v.isoformat()}
    if isinstance(v, IdVal):
        return {"kind": "id", "value": v.value}
    if isinstance(v, NoneVal):
        return {"kind": "none"}
    if isinstance(v, SomeVal):
        return {"kind": "some", "value": value_to_obj(v.value)}
    if isinstance(v, ListVal):
        return {"kind": "list", "items": [value_to_obj(x) for x in v.items]}
    if isinstance(v, RecordVal):
        return {
            "kind": "record",
            "fields": [[l, value_to_obj(x)] for l, x in v.fields],
        }
    if isinstance(v, VariantVal):
        return {
            "kind": "variant",
            "label": v.label,
            "payload": [value_to_obj(x) for x in v.payload],
        }
    raise InvalidEdit(f"cannot serialize value {v!r}")


def value_from_obj(obj) -> Value:
    kind = obj["kind"]
    if kind == "bool":
        return BoolVal(bool(obj["value"]))
    if kind == "int":
        return IntVal(int(obj["value"]))
    if kind == "string":
        return StrVal(obj["value"])
    if kind == "datetime":
        return DateTimeVal.parse(obj["value"])
    if kind == "id":
        return IdVal(int(obj["value"]))
    if kind == "none":
        return NONE
    if kind == "some":
        return SomeVal(value_from_obj(obj["value"]))
    if kind == "list":
        return ListVal(tuple(value_from_obj(x) for x in obj["items"]))
    if kind == "record":
        return RecordVal(tuple((l, value_from_obj(x)) for l, x in obj["fields"]))
    if kind == "variant":
        return VariantVal(
            obj["label"], tuple(value_from_obj(x) for x in obj.get("payload", []))
        )
    raise InvalidEdit(f"unknown value kind {kind!r}")


_EDIT_KINDS = {}


def edit_to_obj(edit: TypeEdit):
    path = list(edit.path)
    if isinstance(edit, AddField):
        obj = {
            "kind": "add-field",
            "path": path,
            "label": edit.label,
            "type": type_to_obj(edit.type),
        }
        if edit.default is not None:
            obj["default"] = value_to_obj(edit.default)
        if edit.at is not None:
            obj["at"] = edit.at
        return obj
    if isinstance(edit, RemoveField):
        return {"kind": "remove-field", "path": path, "label": edit.label}
    if isinstance(edit, RenameField):
        return {"kind": "rename-field", "path": path, "old": edit.old, "new": edit.new}
    if isinstance(edit, ChangeFieldType):
        return {
            "kind": "change-field-type",
            "path": path,
            "label": edit.label,
            "type": type_to_obj(edit.type),
        }
    if isinstance(edit, AddCase):
        obj = {
            "kind": "add-case",
            "path": path,
            "label": edit.label,
            "payload": [type_to_obj(pt) for pt in edit.payload],
        }
        if edit.at is not None:
            obj["at"] = edit.at
        return obj
    if isinstance(edit, RemoveCase):
        return {"kind": "remove-case", "path": path, "label": edit.label}
    if isinstance(edit, RenameCase):
        return {"kind": "rename-case", "path": path, "old": edit.old, "new": edit.new}
    if isinstance(edit, ChangeCasePayload):
        return {
            "kind": "change-case-payload",
            "path": path,
            "label": edit.label,
            "payload": [type_to_obj(pt) for pt in edit.payload],
        }
    if isinstance(edit, ReplaceType):
        return {"kind": "replace-type", "path": path, "type": type_to_obj(edit.type)}
    raise InvalidEdit(f"cannot serialize edit {edit!r}")


def edit_from_obj(obj) -> TypeEdit:
    kind = obj["kind"]
    path = tuple(obj.get("path", []))
    if kind == "add-field":
        return AddField(
            path,
            obj["label"],
            type_from_obj(obj["type"]),
            value_from_obj(obj["default"]) if "default" in obj else None,
            obj.get("at"),
        )
    if kind == "remove-field":
        return RemoveField(path, obj["label"])
    if kind == "rename-field":
        return RenameField(path, obj["old"], obj["new"])
    if kind == "change-field-type":
        return ChangeFieldType(path, obj["label"], type_from_obj(obj["type"]))
    if kind == "add-case":
        return AddCase(
            path,
            obj["label"],
            tuple(type_from_obj(pt) for pt in obj.get("payload", [])),
            obj.get("at"),
        )
    if kind == "remove-case":
        return RemoveCase(path, obj["label"])
    if kind == "rename-case":
        return RenameCase(path, obj["old"], obj["new"])
    if kind == "change-case-payload":
        return ChangeCasePayload(
            path, obj["label"], tuple(type_from_obj(pt) for pt in obj["payload"])
        )
    if kind == "replace-type":
        return ReplaceType(path, type_from_obj(obj["type"]))
    raise InvalidEdit(f"unknown edit kind {kind!r}")
