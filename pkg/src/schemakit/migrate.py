"""Deriving and running data migrations for type edits.

A MigrationPlan is a list of steps, each bound to a path in the old value
shape. A "[]" step in a path means the rest of the step applies to every
element of the list at that point, so plans recurse through collections
without any extra machinery.

Coercions applied automatically: wrapping into a fresh option, int ->
string (decimal), bool -> int (false/true to 0/1). Anything else needs a
ValueMapping hint; a hint over a finite domain must be total, checked at
derivation time. When no hint is given, NeedsInput carries the domain the
caller has to cover, which the CLI turns into prompts (interactive) or a
diagnostic (batch).

Handler reconciliation compares the old and new event variants and reports
the code-side consequences as todos: missing-handler for a new case,
unused-handler for a dropped one (its table entry is removed), and
signature-changed when a case's payload changed shape.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import SchemakitError
from .types import (
    AddCase,
    AddField,
    BoolVal,
    ChangeCasePayload,
    ChangeFieldType,
    IntVal,
    ListOf,
    ListVal,
    NONE,
    NoneVal,
    Option,
    Prim,
    Record,
    RecordVal,
    RemoveCase,
    RemoveField,
    RenameCase,
    RenameField,
    ReplaceType,
    SomeVal,
    StrVal,
    TypeEdit,
    TypeExpr,
    Value,
    Variant,
    VariantVal,
    _CASE_STEP,
    _type_name,
    finite_domain,
    resolve,
    type_from_obj,
    type_to_obj,
    value_from_obj,
    value_to_obj,
)


class NeedsInput(SchemakitError):
    """A non-coercible change: the caller must supply a mapping or default."""

    code = "needs-input"


class MappingIncomplete(SchemakitError):
    code = "mapping-incomplete"


# ---------------------------------------------------------------------------
# value mappings


@dataclass(frozen=True)
class ValueMapping:
    """Either finite case pairs or a named builtin transform (exactly one)."""

    cases: tuple | None = None  # of (Value, Value)
    builtin: str | None = None

    def __post_init__(self):
        if (self.cases is None) == (self.builtin is None):
            raise MappingIncomplete("a mapping has either cases or a builtin")
        if self.cases is not None:
            object.__setattr__(self, "cases", tuple((a, b) for a, b in self.cases))
        if self.builtin is not None and self.builtin not in _BUILTINS:
            raise MappingIncomplete(f"unknown builtin mapping {self.builtin!r}")


def _wrap_some(v):
    return SomeVal(v)


def _to_none(_v):
    return NONE


def _int_to_string(v):
    if not isinstance(v, IntVal):
        raise MappingIncomplete(f"int-to-string applied to {v!r}")
    return StrVal(str(v.value))


def _bool_to_int(v):
    if not isinstance(v, BoolVal):
        raise MappingIncomplete(f"bool-to-int applied to {v!r}")
    return IntVal(1 if v.value else 0)


def _string_to_int(v):
    if not isinstance(v, StrVal):
        raise MappingIncomplete(f"string-to-int applied to {v!r}")
    try:
        return IntVal(int(v.value))
    except ValueError:
        raise MappingIncomplete(f"cannot parse {v.value!r} as an int") from None


_BUILTINS = {
    "wrap-some": _wrap_some,
    "to-none": _to_none,
    "int-to-string": _int_to_string,
    "bool-to-int": _bool_to_int,
    "string-to-int": _string_to_int,
}


def apply_mapping(mapping: ValueMapping, v: Value) -> Value:
    if mapping.builtin is not None:
        return _BUILTINS[mapping.builtin](v)
    for old, new in mapping.cases:
        if old == v:
            return new
    raise MappingIncomplete(f"no mapping case covers {value_to_obj(v)}")


# ---------------------------------------------------------------------------
# plans


@dataclass(frozen=True)
class InitField:
    path: tuple
    label: str
    value: Value
    at: int | None = None


@dataclass(frozen=True)
class DropField:
    path: tuple
    label: str


@dataclass(frozen=True)
class RenameFieldStep:
    path: tuple
    old: str
    new: str


@dataclass(frozen=True)
class MapField:
    path: tuple
    label: str
    mapping: ValueMapping


@dataclass(frozen=True)
class RenameCaseStep:
    path: tuple
    old: str
    new: str


PlanStep = InitField | DropField | RenameFieldStep | MapField | RenameCaseStep


@dataclass(frozen=True)
class MigrationPlan:
    steps: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))

    def prefixed(self, prefix: tuple) -> "MigrationPlan":
        """Rebase every step under a path prefix (used to route through aliases)."""
        prefix = tuple(prefix)
        out = []
        for s in self.steps:
            out.append(
                type(s)(
                    **{
                        **{f: getattr(s, f) for f in s.__dataclass_fields__},
                        "path": prefix + s.path,
                    }
                )
            )
        return MigrationPlan(tuple(out))


def _field_type_at(t: TypeExpr, path: tuple, label: str, defs: dict) -> TypeExpr:
    t = resolve(t, defs)
    for step in path:
        if step == "?" and isinstance(t, Option):
            t = t.inner
        elif step == "[]" and isinstance(t, ListOf):
            t = t.inner
        elif isinstance(t, Record):
            t = t.field_type(step)
        else:
            m = _CASE_STEP.match(step)
            if m and isinstance(t, Variant):
                t = t.payload(m.group("label"))[int(m.group("idx"))]
            else:
                raise NeedsInput(f"cannot resolve path step {step!r} in the old type")
        t = resolve(t, defs)
    if not isinstance(t, Record):
        raise NeedsInput(f"path does not lead to a record in the old type")
    return resolve(t.field_type(label), defs)


def _check_total(mapping: ValueMapping, old_t: TypeExpr, defs: dict) -> None:
    if mapping.builtin is not None:
        return
    domain = finite_domain(old_t, defs)
    if domain is None:
        return  # infinite domain: incompleteness surfaces at migration time
    covered = [a for a, _ in mapping.cases]
    missing = [v for v in domain if v not in covered]
    if missing:
        raise MappingIncomplete(
            f"mapping misses {len(missing)} value(s) of {_type_name(old_t)}",
            missing=[value_to_obj(v) for v in missing],
        )


def derive_migration(
    old: TypeExpr,
    edit: TypeEdit,
    hints: ValueMapping | Value | None = None,
    defs: dict | None = None,
) -> MigrationPlan:
    """Plan the data change for one type edit against the old type."""
    defs = defs or {}

    if isinstance(edit, AddField):
        default = edit.default
        if default is None and isinstance(hints, Value):
            default = hints
        if default is None and isinstance(resolve(edit.type, defs), Option):
            default = NONE  # fresh optional fields start absent
        if default is None:
            raise NeedsInput(
                f"new field {edit.label!r} of type {_type_name(edit.type)} "
                "needs an initial value",
                label=edit.label,
            )
        return MigrationPlan((InitField(edit.path, edit.label, default, edit.at),))

    if isinstance(edit, RemoveField):
        return MigrationPlan((DropField(edit.path, edit.label),))

    if isinstance(edit, RenameField):
        return MigrationPlan((RenameFieldStep(edit.path, edit.old, edit.new),))

    if isinstance(edit, ChangeFieldType):
        old_field = _field_type_at(old, edit.path, edit.label, defs)
        new_field = resolve(edit.type, defs)
        if isinstance(hints, ValueMapping):
            _check_total(hints, old_field, defs)
            return MigrationPlan((MapField(edit.path, edit.label, hints),))
        mapping = _auto_coercion(old_field, new_field)
        if mapping is not None:
            return MigrationPlan((MapField(edit.path, edit.label, mapping),))
        domain = finite_domain(old_field, defs)
        raise NeedsInput(
            f"no automatic coercion from {_type_name(old_field)} "
            f"to {_type_name(new_field)} for field {edit.label!r}",
            label=edit.label,
            domain=(
                [value_to_obj(v) for v in domain]
                if domain is not None
                else _type_name(old_field)
            ),
        )

    if isinstance(edit, RenameCase):
        return MigrationPlan((RenameCaseStep(edit.path, edit.old, edit.new),))

    if isinstance(edit, (AddCase, RemoveCase, ChangeCasePayload)):
        # case-level edits migrate no data; dropped cases are assumed unused
        return MigrationPlan(())

    if isinstance(edit, ReplaceType):
        raise NeedsInput("a wholesale type replacement has no derivable migration")

    raise NeedsInput(f"no migration rule for edit {edit!r}")


def _auto_coercion(old_t: TypeExpr, new_t: TypeExpr) -> ValueMapping | None:
    if new_t == Option(old_t):
        return ValueMapping(builtin="wrap-some")
    if isinstance(old_t, Prim) and isinstance(new_t, Prim):
        if old_t.name == "int" and new_t.name == "string":
            return ValueMapping(builtin="int-to-string")
        if old_t.name == "bool" and new_t.name == "int":
            return ValueMapping(builtin="bool-to-int")
    return None


# ---------------------------------------------------------------------------
# running plans


def _transform_at(value: Value, path: tuple, fn):
    """Apply fn to the value(s) at path; "[]" fans out over list elements."""
    if not path:
        return fn(value)
    step, rest = path[0], path[1:]
    if step == "[]":
        if isinstance(value, ListVal):
            return ListVal(tuple(_transform_at(x, rest, fn) for x in value.items))
        raise MappingIncomplete(f"expected a list at {step!r}, got {value!r}")
    if step == "?":
        if isinstance(value, NoneVal):
            return value
        if isinstance(value, SomeVal):
            return SomeVal(_transform_at(value.value, rest, fn))
        raise MappingIncomplete(f"expected an option at {step!r}, got {value!r}")
    m = _CASE_STEP.match(step)
    if m:
        if not isinstance(value, VariantVal):
            raise MappingIncomplete(f"expected a variant at {step!r}, got {value!r}")
        if value.label != m.group("label"):
            return value  # a different case: nothing to do down this path
        idx = int(m.group("idx"))
        payload = tuple(
            _transform_at(x, rest, fn) if i == idx else x
            for i, x in enumerate(value.payload)
        )
        return VariantVal(value.label, payload)
    if isinstance(value, RecordVal):
        return RecordVal(
            tuple(
                (l, _transform_at(v, rest, fn) if l == step else v)
                for l, v in value.fields
            )
        )
    raise MappingIncomplete(f"step {step!r} does not apply to {value!r}")


def migrate_value(plan: MigrationPlan, value: Value) -> Value:
    """Run the plan; untouched parts of the value are preserved as-is."""
    for step in plan.steps:
        if isinstance(step, InitField):

            def fn(node, step=step):
                if not isinstance(node, RecordVal):
                    raise MappingIncomplete(f"expected a record, got {node!r}")
                fields = [(l, v) for l, v in node.fields if l != step.label]
                at = len(fields) if step.at is None else min(step.at, len(fields))
                fields.insert(at, (step.label, step.value))
                return RecordVal(tuple(fields))

        elif isinstance(step, DropField):

            def fn(node, step=step):
                if not isinstance(node, RecordVal):
                    raise MappingIncomplete(f"expected a record, got {node!r}")
                return RecordVal(
                    tuple((l, v) for l, v in node.fields if l != step.label)
                )

        elif isinstance(step, RenameFieldStep):

            def fn(node, step=step):
                if not isinstance(node, RecordVal):
                    raise MappingIncomplete(f"expected a record, got {node!r}")
                return RecordVal(
                    tuple(
                        (step.new if l == step.old else l, v) for l, v in node.fields
                    )
                )

        elif isinstance(step, MapField):

            def fn(node, step=step):
                if not isinstance(node, RecordVal):
                    raise MappingIncomplete(f"expected a record, got {node!r}")
                return RecordVal(
                    tuple(
                        (l, apply_mapping(step.mapping, v) if l == step.label else v)
                        for l, v in node.fields
                    )
                )

        elif isinstance(step, RenameCaseStep):

            def fn(node, step=step):
                if not isinstance(node, VariantVal):
                    raise MappingIncomplete(f"expected a variant, got {node!r}")
                if node.label == step.old:
                    return VariantVal(step.new, node.payload)
                return node

        else:
            raise MappingIncomplete(f"unknown plan step {step!r}")
        value = _transform_at(value, step.path, fn)
    return value


# ---------------------------------------------------------------------------
# handler reconciliation


@dataclass(frozen=True)
class CodeTodo:
    kind: str  # missing-handler | unused-handler | signature-changed
    case: str
    detail: str = ""


def reconcile_handlers(
    table: dict,
    old_event: Variant,
    new_event: Variant,
    renames=(),
) -> tuple:
    """Returns (new handler table, todos). `renames` pairs (old, new) cases."""
    table = dict(table)
    for old_name, new_name in renames:
        if old_name in table:
            table[new_name] = table.pop(old_name)
    old_cases = dict(
        (dict(renames).get(l, l), p) for l, p in old_event.cases
    )
    todos = []
    for label, payload in new_event.cases:
        if label not in old_cases:
            todos.append(CodeTodo("missing-handler", label, "new event case"))
        elif old_cases[label] != payload:
            todos.append(
                CodeTodo(
                    "signature-changed",
                    label,
                    f"payload is now ({', '.join(_type_name(p) for p in payload)})",
                )
            )
    new_labels = set(new_event.labels())
    for label in old_cases:
        if label not in new_labels:
            todos.append(CodeTodo("unused-handler", label, "event case removed"))
            table.pop(label, None)
    return table, todos


# ---------------------------------------------------------------------------
# JSON


def mapping_to_obj(m: ValueMapping):
    if m.builtin is not None:
        return {"builtin": m.builtin}
    return {"cases": [[value_to_obj(a), value_to_obj(b)] for a, b in m.cases]}


def mapping_from_obj(obj) -> ValueMapping:
    if "builtin" in obj:
        return ValueMapping(builtin=obj["builtin"])
    return ValueMapping(
        cases=tuple(
            (value_from_obj(a), value_from_obj(b)) for a, b in obj["cases"]
        )
    )


def plan_to_obj(plan: MigrationPlan):
    steps = []
    for s in plan.steps:
        if isinstance(s, InitField):
            obj = {
                "op": "init-field",
                "path": list(s.path),
                "label": s.label,
                "value": value_to_obj(s.value),
            }
            if s.at is not None:
                obj["at"] = s.at
            steps.append(obj)
        elif isinstance(s, DropField):
            steps.append({"op": "drop-field", "path": list(s.path), "label": s.label})
        elif isinstance(s, RenameFieldStep):
            steps.append(
                {"op": "rename-field", "path": list(s.path), "old": s.old, "new": s.new}
            )
        elif isinstance(s, MapField):
            steps.append(
                {
                    "op": "map-field",
                    "path": list(s.path),
                    "label": s.label,
                    "mapping": mapping_to_obj(s.mapping),
                }
            )
        elif isinstance(s, RenameCaseStep):
            steps.append(
                {"op": "rename-case", "path": list(s.path), "old": s.old, "new": s.new}
            )
    return {"steps": steps}


def plan_from_obj(obj) -> MigrationPlan:
    steps = []
    for s in obj["steps"]:
        op = s["op"]
        path = tuple(s["path"])
        if op == "init-field":
            steps.append(
                InitField(path, s["label"], value_from_obj(s["value"]), s.get("at"))
            )
        elif op == "drop-field":
            steps.append(DropField(path, s["label"]))
        elif op == "rename-field":
            steps.append(RenameFieldStep(path, s["old"], s["new"]))
        elif op == "map-field":
            steps.append(MapField(path, s["label"], mapping_from_obj(s["mapping"])))
        elif op == "rename-case":
            steps.append(RenameCaseStep(path, s["old"], s["new"]))
        else:
            raise MappingIncomplete(f"unknown plan op {op!r}")
    return MigrationPlan(tuple(steps))
