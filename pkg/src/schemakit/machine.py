"""A tiny state-machine DSL plus live patching of running instances.

The surface syntax is deliberately frozen:

    machine doors

    var isClosed: bool = true

    init closed

    state closed {
      entry {
        isClosed := true
      }
      on open -> opened
    }

    state opened {
      entry {
        isClosed := false
      }
      on close -> closed
    }

Entry statements are assignments of literals or of ``not <boolvar>``.
A running instance tracks the current state, variable values, how many
times each state has been entered, and a queue of pending events.

`patch` applies a set of definition changes to a machine *and its running
instance* atomically. The interesting part is what happens to runtime
state the new definition no longer supports: the caller picks a strategy
for a removed current state (reject / gotoInitial / explicit target) and
for pending events whose event name no longer exists (drop / reject).
gotoInitial never executes the entry block and never counts a visit — the
instance is relocated, not re-run.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace

from .errors import SchemakitError

VAR_TYPES = ("bool", "int", "string")


class MachineSyntaxError(SchemakitError):
    code = "machine-syntax"

    def __init__(self, message, line=None):
        super().__init__(message, line=line)
        self.line = line


class MachineInvalid(SchemakitError):
    code = "machine-invalid"


class DuplicateState(MachineInvalid):
    code = "duplicate-state"


class UnknownTarget(MachineInvalid):
    code = "unknown-target"


class InvalidPatch(SchemakitError):
    code = "invalid-patch"


class Rejected(SchemakitError):
    code = "rejected"


# ---------------------------------------------------------------------------
# definition


@dataclass(frozen=True)
class NotOp:
    var: str


@dataclass(frozen=True)
class Assign:
    var: str
    value: object  # literal, or NotOp


@dataclass(frozen=True)
class Transition:
    event: str
    target: str


@dataclass(frozen=True)
class VarDecl:
    name: str
    type: str
    init: object


@dataclass(frozen=True)
class StateDef:
    name: str
    entry: tuple = ()
    transitions: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "entry", tuple(self.entry))
        object.__setattr__(self, "transitions", tuple(self.transitions))

    def transition_for(self, event):
        for t in self.transitions:
            if t.event == event:
                return t
        return None


@dataclass(frozen=True)
class MachineDef:
    name: str
    vars: tuple
    init: str
    states: tuple

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(self.vars))
        object.__setattr__(self, "states", tuple(self.states))

    def state(self, name):
        for s in self.states:
            if s.name == name:
                return s
        return None

    def var(self, name):
        for v in self.vars:
            if v.name == name:
                return v
        return None


def _literal_type(value):
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int"
    if isinstance(value, str):
        return "string"
    return None


def validate(m: MachineDef) -> None:
    seen = set()
    for s in m.states:
        if s.name in seen:
            raise DuplicateState(f"state {s.name!r} declared twice")
        seen.add(s.name)
    vnames = set()
    for v in m.vars:
        if v.name in vnames:
            raise MachineInvalid(f"variable {v.name!r} declared twice")
        vnames.add(v.name)
        if v.type not in VAR_TYPES:
            raise MachineInvalid(f"unknown variable type {v.type!r}")
        if _literal_type(v.init) != v.type:
            raise MachineInvalid(
                f"initializer for {v.name!r} is not a {v.type}"
            )
    if not m.states:
        raise MachineInvalid("a machine needs at least one state")
    if m.state(m.init) is None:
        raise UnknownTarget(f"initial state {m.init!r} is not declared")
    for s in m.states:
        events = set()
        for t in s.transitions:
            if t.event in events:
                raise MachineInvalid(
                    f"state {s.name!r} handles {t.event!r} twice"
                )
            events.add(t.event)
            if m.state(t.target) is None:
                raise UnknownTarget(
                    f"transition {s.name!r} --{t.event}--> {t.target!r}: no such state"
                )
        for st in s.entry:
            decl = m.var(st.var)
            if decl is None:
                raise MachineInvalid(f"assignment to undeclared variable {st.var!r}")
            if isinstance(st.value, NotOp):
                src = m.var(st.value.var)
                if src is None:
                    raise MachineInvalid(f"'not' reads undeclared {st.value.var!r}")
                if src.type != "bool" or decl.type != "bool":
                    raise MachineInvalid("'not' works on bool variables only")
            elif _literal_type(st.value) != decl.type:
                raise MachineInvalid(
                    f"assigning a {_literal_type(st.value)} to {decl.type} {st.var!r}"
                )


# ---------------------------------------------------------------------------
# parse / print

_NAME = r"[A-Za-z_][A-Za-z0-9_-]*"
_MACHINE_RE = re.compile(rf"^machine\s+({_NAME})$")
_VAR_RE = re.compile(rf"^var\s+({_NAME})\s*:\s*({_NAME})\s*=\s*(.+)$")
_INIT_RE = re.compile(rf"^init\s+({_NAME})$")
_STATE_RE = re.compile(rf"^state\s+({_NAME})$")
_ON_RE = re.compile(rf"^on\s+({_NAME})\s*->\s*({_NAME})$")
_ASSIGN_RE = re.compile(rf"^({_NAME})\s*:=\s*(.+)$")
_NOT_RE = re.compile(rf"^not\s+({_NAME})$")


def _parse_literal(raw, lineno):
    raw = raw.strip()
    if raw == "true":
        return True
    if raw == "false":
        return False
    if re.fullmatch(r"-?\d+", raw):
        return int(raw)
    if raw.startswith('"') and raw.endswith('"'):
        try:
            return json.loads(raw)
        except ValueError:
            raise MachineSyntaxError(f"bad string literal {raw}", lineno) from None
    raise MachineSyntaxError(f"bad literal {raw!r}", lineno)


def print_literal(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return json.dumps(value)


def _logical_lines(text: str):
    """(lineno, content) with braces split onto their own lines, so the
    one-line form `state s { entry { x := 1 } on go -> s }` parses too.
    Braces inside string literals stay put."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        buf, in_str, escaped = [], False, False
        pieces = []
        for ch in raw:
            if in_str:
                buf.append(ch)
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_str = False
                continue
            if ch == '"':
                in_str = True
                buf.append(ch)
            elif ch in "{}":
                pieces.append("".join(buf))
                pieces.append(ch)
                buf = []
            else:
                buf.append(ch)
        pieces.append("".join(buf))
        for piece in pieces:
            piece = piece.strip()
            if piece:
                yield lineno, piece


def parse_machine(text: str) -> MachineDef:
    name = None
    vars_, states = [], []
    init = None
    cur = None  # [name, entry list, transitions list]
    # where we are: top | state-open | state | entry-open | entry
    where = "top"
    section = "machine"  # machine -> vars -> init -> states

    for lineno, line in _logical_lines(text):
        if where == "state-open":
            if line != "{":
                raise MachineSyntaxError("expected '{' after the state name", lineno)
            where = "state"
            continue
        if where == "entry-open":
            if line != "{":
                raise MachineSyntaxError("expected '{' after 'entry'", lineno)
            where = "entry"
            continue

        if where == "entry":
            if line == "}":
                where = "state"
                continue
            if m := _ASSIGN_RE.match(line):
                rhs = m.group(2).strip()
                if n := _NOT_RE.match(rhs):
                    cur[1].append(Assign(m.group(1), NotOp(n.group(1))))
                else:
                    cur[1].append(Assign(m.group(1), _parse_literal(rhs, lineno)))
                continue
            raise MachineSyntaxError(f"expected an assignment, got {line!r}", lineno)

        if where == "state":
            if line == "}":
                states.append(StateDef(cur[0], tuple(cur[1]), tuple(cur[2])))
                cur = None
                where = "top"
                continue
            if line == "entry":
                if cur[1]:
                    raise MachineSyntaxError("second 'entry' block", lineno)
                where = "entry-open"
                continue
            if m := _ON_RE.match(line):
                cur[2].append(Transition(m.group(1), m.group(2)))
                continue
            raise MachineSyntaxError(f"unexpected line {line!r} in a state", lineno)

        # top level
        if m := _MACHINE_RE.match(line):
            if name is not None:
                raise MachineSyntaxError("second 'machine' line", lineno)
            name = m.group(1)
            continue
        if name is None:
            raise MachineSyntaxError("expected 'machine <name>' first", lineno)
        if m := _VAR_RE.match(line):
            if section not in ("machine", "vars"):
                raise MachineSyntaxError("var declarations go before 'init'", lineno)
            section = "vars"
            vars_.append(VarDecl(m.group(1), m.group(2), _parse_literal(m.group(3), lineno)))
            continue
        if m := _INIT_RE.match(line):
            if init is not None:
                raise MachineSyntaxError("second 'init' line", lineno)
            if section == "states":
                raise MachineSyntaxError("'init' goes before the states", lineno)
            section = "init"
            init = m.group(1)
            continue
        if m := _STATE_RE.match(line):
            if init is None:
                raise MachineSyntaxError("'init' must come before the states", lineno)
            section = "states"
            cur = [m.group(1), [], []]
            where = "state-open"
            continue
        raise MachineSyntaxError(f"unexpected line {line!r}", lineno)

    if name is None:
        raise MachineSyntaxError("empty input", None)
    if init is None:
        raise MachineSyntaxError("missing 'init' line", None)
    if where != "top":
        raise MachineSyntaxError("unclosed block at end of input", None)
    m = MachineDef(name, tuple(vars_), init, tuple(states))
    validate(m)
    return m


def print_machine(m: MachineDef) -> str:
    out = [f"machine {m.name}", ""]
    for v in m.vars:
        out.append(f"var {v.name}: {v.type} = {print_literal(v.init)}")
    if m.vars:
        out.append("")
    out.append(f"init {m.init}")
    for s in m.states:
        out.append("")
        out.append(f"state {s.name} {{")
        if s.entry:
            out.append("  entry {")
            for st in s.entry:
                if isinstance(st.value, NotOp):
                    out.append(f"    {st.var} := not {st.value.var}")
                else:
                    out.append(f"    {st.var} := {print_literal(st.value)}")
            out.append("  }")
        for t in s.transitions:
            out.append(f"  on {t.event} -> {t.target}")
        out.append("}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# runtime


@dataclass
class RuntimeState:
    current: str
    vars: dict = field(default_factory=dict)
    visited: dict = field(default_factory=dict)
    pending: tuple = ()


@dataclass(frozen=True)
class StepResult:
    state: str
    fired: bool
    note: str = ""


def _exec_entry(state: StateDef, vars_: dict):
    for st in state.entry:
        if isinstance(st.value, NotOp):
            vars_[st.var] = not vars_[st.value.var]
        else:
            vars_[st.var] = st.value


def start(m: MachineDef) -> RuntimeState:
    """A fresh instance: the initial state's entry runs once."""
    validate(m)
    rt = RuntimeState(m.init, {v.name: v.init for v in m.vars}, {m.init: 1}, ())
    _exec_entry(m.state(m.init), rt.vars)
    return rt


def step(m: MachineDef, rt: RuntimeState, event: str) -> StepResult:
    """Feed one event. Unhandled events are dropped with a note — an
    instance never wedges on input it does not understand."""
    state = m.state(rt.current)
    if state is None:
        raise MachineInvalid(f"instance is in unknown state {rt.current!r}")
    t = state.transition_for(event)
    if t is None:
        return StepResult(rt.current, False, f"event {event!r} ignored in {rt.current!r}")
    target = m.state(t.target)
    rt.current = target.name
    rt.visited[target.name] = rt.visited.get(target.name, 0) + 1
    _exec_entry(target, rt.vars)
    return StepResult(rt.current, True)


def enqueue(rt: RuntimeState, event: str) -> None:
    rt.pending = rt.pending + (event,)


def drain(m: MachineDef, rt: RuntimeState) -> list:
    """Deliver pending events in order; returns their StepResults."""
    out = []
    while rt.pending:
        event, rt.pending = rt.pending[0], rt.pending[1:]
        out.append(step(m, rt, event))
    return out


def rt_to_obj(rt: RuntimeState) -> dict:
    return {
        "state": rt.current,
        "vars": dict(rt.vars),
        "visited": dict(rt.visited),
        "pending": list(rt.pending),
    }


def rt_from_obj(obj) -> RuntimeState:
    return RuntimeState(
        obj["state"],
        dict(obj.get("vars", {})),
        dict(obj.get("visited", {})),
        tuple(obj.get("pending", ())),
    )


# ---------------------------------------------------------------------------
# patches


@dataclass(frozen=True)
class PAddState:
    state: StateDef


@dataclass(frozen=True)
class PRenameState:
    old: str
    new: str


@dataclass(frozen=True)
class PRemoveState:
    name: str


@dataclass(frozen=True)
class PAddVar:
    decl: VarDecl


@dataclass(frozen=True)
class PRemoveVar:
    name: str


@dataclass(frozen=True)
class PRenameVar:
    old: str
    new: str


@dataclass(frozen=True)
class PChangeVarType:
    name: str
    type: str
    init: object = None  # explicit new initializer; None means "derive"


@dataclass(frozen=True)
class PAddTransition:
    state: str
    event: str
    target: str


@dataclass(frozen=True)
class PRemoveTransition:
    state: str
    event: str


@dataclass(frozen=True)
class PChangeTransitionEvent:
    state: str
    old: str
    new: str


@dataclass(frozen=True)
class PSetEntry:
    state: str
    stmts: tuple

    def __post_init__(self):
        object.__setattr__(self, "stmts", tuple(self.stmts))


@dataclass(frozen=True)
class PSetInit:
    name: str


PatchOp = (
    PAddState
    | PRenameState
    | PRemoveState
    | PAddVar
    | PRemoveVar
    | PRenameVar
    | PChangeVarType
    | PAddTransition
    | PRemoveTransition
    | PChangeTransitionEvent
    | PSetEntry
    | PSetInit
)


@dataclass(frozen=True)
class Patch:
    ops: tuple
    on_current: object = "reject"  # "reject" | "gotoInitial" | ("explicit", state)
    on_pending: str = "drop"  # "drop" | "reject"

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))


def _convert(value, old_type, new_type):
    """The blessed lossless conversions; None when there is no path."""
    if old_type == new_type:
        return value, True
    if old_type == "bool" and new_type == "int":
        return int(value), True
    if old_type == "int" and new_type == "string":
        return str(value), True
    return None, False


_TYPE_DEFAULTS = {"bool": False, "int": 0, "string": ""}


def _rename_in_stmt(st: Assign, old, new) -> Assign:
    var = new if st.var == old else st.var
    value = st.value
    if isinstance(value, NotOp) and value.var == old:
        value = NotOp(new)
    return Assign(var, value)


def patch(m: MachineDef, rt: RuntimeState, p: Patch):
    """Apply a patch to a definition and its running instance, atomically.

    Returns (new def, new rt, notes). Raises Rejected when a strategy says
    the runtime cannot survive, InvalidPatch / MachineInvalid when the ops
    do not produce a well-formed machine. On any raise, nothing changes.
    """
    validate(m)
    old_events = {t.event for s in m.states for t in s.transitions}
    name, init = m.name, m.init
    vars_ = list(m.vars)
    states = [StateDef(s.name, s.entry, s.transitions) for s in m.states]
    cur = rt.current
    rvars, visited, pending = dict(rt.vars), dict(rt.visited), list(rt.pending)
    notes = []

    def state_idx(sname):
        for i, s in enumerate(states):
            if s.name == sname:
                return i
        raise InvalidPatch(f"no state {sname!r}")

    def var_idx(vname):
        for i, v in enumerate(vars_):
            if v.name == vname:
                return i
        raise InvalidPatch(f"no variable {vname!r}")

    for op in p.ops:
        if isinstance(op, PAddState):
            if any(s.name == op.state.name for s in states):
                raise InvalidPatch(f"state {op.state.name!r} already exists")
            states.append(op.state)

        elif isinstance(op, PRenameState):
            i = state_idx(op.old)
            if any(s.name == op.new for s in states):
                raise InvalidPatch(f"state {op.new!r} already exists")
            states[i] = replace(states[i], name=op.new)
            states = [
                replace(
                    s,
                    transitions=tuple(
                        replace(t, target=op.new) if t.target == op.old else t
                        for t in s.transitions
                    ),
                )
                for s in states
            ]
            if init == op.old:
                init = op.new
            if cur == op.old:
                cur = op.new
            if op.old in visited:
                visited[op.new] = visited.pop(op.old)

        elif isinstance(op, PRemoveState):
            i = state_idx(op.name)
            del states[i]
            dropped = 0
            for j, s in enumerate(states):
                kept = tuple(t for t in s.transitions if t.target != op.name)
                dropped += len(s.transitions) - len(kept)
                states[j] = replace(s, transitions=kept)
            if dropped:
                notes.append(
                    f"removed {dropped} transition(s) targeting {op.name!r}"
                )
            visited.pop(op.name, None)

        elif isinstance(op, PAddVar):
            if any(v.name == op.decl.name for v in vars_):
                raise InvalidPatch(f"variable {op.decl.name!r} already exists")
            vars_.append(op.decl)
            rvars[op.decl.name] = op.decl.init

        elif isinstance(op, PRemoveVar):
            i = var_idx(op.name)
            del vars_[i]
            stripped = 0
            for j, s in enumerate(states):
                kept = tuple(
                    st
                    for st in s.entry
                    if st.var != op.name
                    and not (isinstance(st.value, NotOp) and st.value.var == op.name)
                )
                stripped += len(s.entry) - len(kept)
                states[j] = replace(s, entry=kept)
            if stripped:
                notes.append(f"removed {stripped} statement(s) using {op.name!r}")
            rvars.pop(op.name, None)

        elif isinstance(op, PRenameVar):
            i = var_idx(op.old)
            if any(v.name == op.new for v in vars_):
                raise InvalidPatch(f"variable {op.new!r} already exists")
            vars_[i] = replace(vars_[i], name=op.new)
            states = [
                replace(s, entry=tuple(_rename_in_stmt(st, op.old, op.new) for st in s.entry))
                for s in states
            ]
            if op.old in rvars:
                rvars[op.new] = rvars.pop(op.old)

        elif isinstance(op, PChangeVarType):
            i = var_idx(op.name)
            decl = vars_[i]
            if op.type not in VAR_TYPES:
                raise InvalidPatch(f"unknown variable type {op.type!r}")
            new_init, ok = _convert(decl.init, decl.type, op.type)
            if op.init is not None:
                if _literal_type(op.init) != op.type:
                    raise InvalidPatch(f"initializer is not a {op.type}")
                new_init = op.init
            elif not ok:
                new_init = _TYPE_DEFAULTS[op.type]
            vars_[i] = VarDecl(op.name, op.type, new_init)
            old_value = rvars.get(op.name, decl.init)
            converted, ok = _convert(old_value, decl.type, op.type)
            if ok:
                rvars[op.name] = converted
            else:
                rvars[op.name] = new_init
                notes.append(
                    f"variable {op.name!r} reinitialized: no conversion "
                    f"from {decl.type} to {op.type}"
                )

        elif isinstance(op, PAddTransition):
            i = state_idx(op.state)
            states[i] = replace(
                states[i],
                transitions=states[i].transitions + (Transition(op.event, op.target),),
            )

        elif isinstance(op, PRemoveTransition):
            i = state_idx(op.state)
            kept = tuple(t for t in states[i].transitions if t.event != op.event)
            if len(kept) == len(states[i].transitions):
                raise InvalidPatch(
                    f"state {op.state!r} has no transition on {op.event!r}"
                )
            states[i] = replace(states[i], transitions=kept)

        elif isinstance(op, PChangeTransitionEvent):
            i = state_idx(op.state)
            hit = False
            ts = []
            for t in states[i].transitions:
                if t.event == op.old:
                    ts.append(Transition(op.new, t.target))
                    hit = True
                else:
                    ts.append(t)
            if not hit:
                raise InvalidPatch(
                    f"state {op.state!r} has no transition on {op.old!r}"
                )
            states[i] = replace(states[i], transitions=tuple(ts))

        elif isinstance(op, PSetEntry):
            i = state_idx(op.state)
            states[i] = replace(states[i], entry=tuple(op.stmts))

        elif isinstance(op, PSetInit):
            init = op.name

        else:
            raise InvalidPatch(f"unknown patch op {op!r}")

    new_m = MachineDef(name, tuple(vars_), init, tuple(states))
    validate(new_m)

    # runtime reconciliation
    if new_m.state(cur) is None:
        if p.on_current == "reject":
            raise Rejected(f"current state {cur!r} was removed")
        if p.on_current == "gotoInitial":
            cur = new_m.init  # relocation: no entry run, no visit counted
        elif isinstance(p.on_current, tuple) and p.on_current[0] == "explicit":
            target = p.on_current[1]
            if new_m.state(target) is None:
                raise InvalidPatch(f"explicit target {target!r} does not exist")
            cur = target
        else:
            raise InvalidPatch(f"bad current-state strategy {p.on_current!r}")

    new_events = {t.event for s in new_m.states for t in s.transitions}
    stale = [e for e in pending if e in old_events and e not in new_events]
    if stale:
        if p.on_pending == "reject":
            raise Rejected(f"pending event(s) {stale!r} no longer exist")
        if p.on_pending != "drop":
            raise InvalidPatch(f"bad pending-event strategy {p.on_pending!r}")
        pending = [e for e in pending if e not in stale]
        notes.append(f"dropped stale pending event(s): {', '.join(stale)}")

    new_rt = RuntimeState(cur, rvars, visited, tuple(pending))
    return new_m, new_rt, tuple(notes)


# ---------------------------------------------------------------------------
# diffing two definitions


@dataclass(frozen=True)
class MachineRename:
    kind: str  # "state" | "var"
    old: str
    new: str


def diff_machines(old: MachineDef, new: MachineDef, directives=()) -> Patch:
    """A patch turning `old` into `new`. Renames are never guessed — pass
    MachineRename directives for identities that moved."""
    ops = []
    renamed_states, renamed_vars = {}, {}
    for d in directives:
        if d.kind == "state":
            if old.state(d.old) is None or new.state(d.new) is None:
                raise InvalidPatch(f"rename directive {d.old!r}->{d.new!r} fits nothing")
            renamed_states[d.old] = d.new
            ops.append(PRenameState(d.old, d.new))
        elif d.kind == "var":
            if old.var(d.old) is None or new.var(d.new) is None:
                raise InvalidPatch(f"rename directive {d.old!r}->{d.new!r} fits nothing")
            renamed_vars[d.old] = d.new
            ops.append(PRenameVar(d.old, d.new))
        else:
            raise InvalidPatch(f"bad rename kind {d.kind!r}")

    old_vnames = {renamed_vars.get(v.name, v.name) for v in old.vars}
    for v in old.vars:
        if renamed_vars.get(v.name, v.name) not in {x.name for x in new.vars}:
            ops.append(PRemoveVar(renamed_vars.get(v.name, v.name)))
    for v in new.vars:
        if v.name not in old_vnames:
            ops.append(PAddVar(v))
        else:
            before = next(
                x for x in old.vars if renamed_vars.get(x.name, x.name) == v.name
            )
            if (before.type, before.init) != (v.type, v.init):
                ops.append(PChangeVarType(v.name, v.type, v.init))

    old_snames = {renamed_states.get(s.name, s.name) for s in old.states}
    new_snames = {s.name for s in new.states}
    for s in new.states:
        if s.name not in old_snames:
            # transitions come later so targets can be added first
            ops.append(PAddState(StateDef(s.name, s.entry, ())))

    for s in old.states:
        mapped = renamed_states.get(s.name, s.name)
        if mapped not in new_snames:
            continue
        after = new.state(mapped)
        entry_now = s.entry
        for o, n in renamed_vars.items():
            entry_now = tuple(_rename_in_stmt(st, o, n) for st in entry_now)
        if entry_now != after.entry:
            ops.append(PSetEntry(mapped, after.entry))
        mapped_ts = {
            t.event: renamed_states.get(t.target, t.target) for t in s.transitions
        }
        after_ts = {t.event: t.target for t in after.transitions}
        for event, target in mapped_ts.items():
            if event not in after_ts:
                ops.append(PRemoveTransition(mapped, event))
            elif after_ts[event] != target:
                ops.append(PRemoveTransition(mapped, event))
                ops.append(PAddTransition(mapped, event, after_ts[event]))
        for event, target in after_ts.items():
            if event not in mapped_ts:
                ops.append(PAddTransition(mapped, event, target))

    for s in new.states:
        if s.name not in old_snames:
            for t in s.transitions:
                ops.append(PAddTransition(s.name, t.event, t.target))

    for s in old.states:
        mapped = renamed_states.get(s.name, s.name)
        if mapped not in new_snames:
            ops.append(PRemoveState(mapped))

    mapped_init = renamed_states.get(old.init, old.init)
    if mapped_init != new.init:
        ops.append(PSetInit(new.init))

    return Patch(tuple(ops))


def machines_equiv(a: MachineDef, b: MachineDef) -> bool:
    """Definition equality up to declaration order."""

    def shape(m):
        return (
            m.name,
            m.init,
            frozenset(m.vars),
            frozenset(
                (s.name, s.entry, frozenset(s.transitions)) for s in m.states
            ),
        )

    return shape(a) == shape(b)


# ---------------------------------------------------------------------------
# JSON forms


def _stmt_to_obj(st: Assign):
    if isinstance(st.value, NotOp):
        return {"var": st.var, "not": st.value.var}
    return {"var": st.var, "value": st.value}


def _stmt_from_obj(obj):
    if "not" in obj:
        return Assign(obj["var"], NotOp(obj["not"]))
    return Assign(obj["var"], obj["value"])


def _state_to_obj(s: StateDef):
    return {
        "name": s.name,
        "entry": [_stmt_to_obj(st) for st in s.entry],
        "on": [{"event": t.event, "target": t.target} for t in s.transitions],
    }


def _state_from_obj(obj) -> StateDef:
    return StateDef(
        obj["name"],
        tuple(_stmt_from_obj(st) for st in obj.get("entry", ())),
        tuple(Transition(t["event"], t["target"]) for t in obj.get("on", ())),
    )


def _var_to_obj(v: VarDecl):
    return {"name": v.name, "type": v.type, "init": v.init}


def patch_op_to_obj(op) -> dict:
    if isinstance(op, PAddState):
        return {"op": "add-state", "state": _state_to_obj(op.state)}
    if isinstance(op, PRenameState):
        return {"op": "rename-state", "old": op.old, "new": op.new}
    if isinstance(op, PRemoveState):
        return {"op": "remove-state", "name": op.name}
    if isinstance(op, PAddVar):
        return {"op": "add-var", "var": _var_to_obj(op.decl)}
    if isinstance(op, PRemoveVar):
        return {"op": "remove-var", "name": op.name}
    if isinstance(op, PRenameVar):
        return {"op": "rename-var", "old": op.old, "new": op.new}
    if isinstance(op, PChangeVarType):
        out = {"op": "change-var-type", "name": op.name, "type": op.type}
        if op.init is not None:
            out["init"] = op.init
        return out
    if isinstance(op, PAddTransition):
        return {
            "op": "add-transition",
            "state": op.state,
            "event": op.event,
            "target": op.target,
        }
    if isinstance(op, PRemoveTransition):
        return {"op": "remove-transition", "state": op.state, "event": op.event}
    if isinstance(op, PChangeTransitionEvent):
        return {
            "op": "change-transition-event",
            "state": op.state,
            "old": op.old,
            "new": op.new,
        }
    if isinstance(op, PSetEntry):
        return {
            "op": "set-entry",
            "state": op.state,
            "stmts": [_stmt_to_obj(st) for st in op.stmts],
        }
    if isinstance(op, PSetInit):
        return {"op": "set-init", "name": op.name}
    raise TypeError(op)


def patch_op_from_obj(obj):
    kind = obj["op"]
    if kind == "add-state":
        return PAddState(_state_from_obj(obj["state"]))
    if kind == "rename-state":
        return PRenameState(obj["old"], obj["new"])
    if kind == "remove-state":
        return PRemoveState(obj["name"])
    if kind == "add-var":
        v = obj["var"]
        return PAddVar(VarDecl(v["name"], v["type"], v["init"]))
    if kind == "remove-var":
        return PRemoveVar(obj["name"])
    if kind == "rename-var":
        return PRenameVar(obj["old"], obj["new"])
    if kind == "change-var-type":
        return PChangeVarType(obj["name"], obj["type"], obj.get("init"))
    if kind == "add-transition":
        return PAddTransition(obj["state"], obj["event"], obj["target"])
    if kind == "remove-transition":
        return PRemoveTransition(obj["state"], obj["event"])
    if kind == "change-transition-event":
        return PChangeTransitionEvent(obj["state"], obj["old"], obj["new"])
    if kind == "set-entry":
        return PSetEntry(obj["state"], tuple(_stmt_from_obj(s) for s in obj["stmts"]))
    if kind == "set-init":
        return PSetInit(obj["name"])
    raise SchemakitError(f"unknown patch op {kind!r}")


def patch_to_obj(p: Patch) -> dict:
    on_current = p.on_current
    if isinstance(on_current, tuple):
        on_current = {"explicit": on_current[1]}
    return {
        "ops": [patch_op_to_obj(op) for op in p.ops],
        "currentStateStrategy": on_current,
        "pendingEventStrategy": p.on_pending,
    }


def strategy_from_obj(raw):
    if isinstance(raw, dict) and "explicit" in raw:
        return ("explicit", raw["explicit"])
    return raw


def patch_from_obj(obj) -> Patch:
    return Patch(
        tuple(patch_op_from_obj(o) for o in obj.get("ops", ())),
        strategy_from_obj(obj.get("currentStateStrategy", "reject")),
        obj.get("pendingEventStrategy", "drop"),
    )
