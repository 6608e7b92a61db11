"""Attributed document trees whose structure can evolve while people keep
editing the content.

Every node carries a stable identity (`nid`). Base-document nodes are
numbered in depth-first order (n0, n1, ...); nodes created by edits get
identities *derived* from the node they grew out of and from the edit's
(author, seq) stamp, so two replicas replaying the same history mint the
same identities without coordination.

Edits come in two flavours:

* structural ("schema-class"): ChangeTag, Wrap, SplitText, AddColumn —
  they reshape the tree;
* content ("data-class"): InsertItem, Reorder, SetText — they change what
  the tree says.

`merge` rebases two authors' logs onto each other: structural edits from
both sides are applied first (in (author, seq) order, with duplicate
suppression and conflict detection), then content edits are transported
through the structural edits they did not know about and replayed. Cells
minted by AddColumn that still hold the column default after the merge
come back as pending questions — the merge knows the value is missing but
cannot invent it.
"""

from __future__ import annotations

import copy
import re
from dataclasses import dataclass, field

from .errors import SchemakitError


class SelectorSyntax(SchemakitError):
    code = "selector-syntax"


class SelectorMiss(SchemakitError):
    code = "selector-miss"


class Unrewritable(SchemakitError):
    code = "unrewritable"


class BadLog(SchemakitError):
    code = "bad-log"


# ---------------------------------------------------------------------------
# nodes


@dataclass
class Text:
    content: str
    nid: str = ""


@dataclass
class Elem:
    tag: str
    attrs: dict = field(default_factory=dict)
    children: list = field(default_factory=list)
    nid: str = ""


Node = Elem | Text


def elem(tag, attrs=None, *children) -> Elem:
    return Elem(tag, dict(attrs or {}), list(children))


def text(content) -> Text:
    return Text(content)


def assign_nids(root: Node) -> Node:
    """Number every node in depth-first order: n0, n1, ..."""
    counter = 0

    def walk(n):
        nonlocal counter
        n.nid = f"n{counter}"
        counter += 1
        if isinstance(n, Elem):
            for c in n.children:
                walk(c)

    walk(root)
    return root


def get_text(n: Node) -> str:
    if isinstance(n, Text):
        return n.content
    return "".join(get_text(c) for c in n.children)


def find_by_nid(root: Node, nid: str):
    if root.nid == nid:
        return root
    if isinstance(root, Elem):
        for c in root.children:
            hit = find_by_nid(c, nid)
            if hit is not None:
                return hit
    return None


def parent_of(root: Elem, node: Node):
    """(parent, index) of `node` in the tree, or None."""
    for i, c in enumerate(root.children):
        if c is node:
            return root, i
        if isinstance(c, Elem):
            hit = parent_of(c, node)
            if hit is not None:
                return hit
    return None


def node_to_obj(n: Node, with_nids: bool = True):
    if isinstance(n, Text):
        obj = {"text": n.content}
    else:
        obj = {
            "tag": n.tag,
            "attrs": dict(sorted(n.attrs.items())),
            "children": [node_to_obj(c, with_nids) for c in n.children],
        }
    if with_nids:
        obj["nid"] = n.nid
    return obj


def node_from_obj(obj) -> Node:
    if "text" in obj:
        return Text(obj["text"], obj.get("nid", ""))
    return Elem(
        obj["tag"],
        dict(obj.get("attrs", {})),
        [node_from_obj(c) for c in obj.get("children", ())],
        obj.get("nid", ""),
    )


def content_equal(a: Node, b: Node) -> bool:
    """Equality ignoring node identities."""
    return node_to_obj(a, with_nids=False) == node_to_obj(b, with_nids=False)


# ---------------------------------------------------------------------------
# selectors


@dataclass(frozen=True)
class Step:
    tag: str
    attr: tuple | None = None  # (name, value)
    index: int | None = None


@dataclass(frozen=True)
class PathSel:
    steps: tuple

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))


@dataclass(frozen=True)
class NodeRef:
    nid: str


Selector = PathSel | NodeRef

_STEP_RE = re.compile(
    r"^(?P<tag>[A-Za-z_][A-Za-z0-9_-]*)"
    r"(?:\[(?:(?P<an>[A-Za-z_][A-Za-z0-9_-]*)='(?P<av>[^']*)'|(?P<ix>\d+))\])?$"
)


def parse_sel(s: str) -> PathSel:
    if not s.startswith("/"):
        raise SelectorSyntax(f"selector must start with '/': {s!r}")
    steps = []
    for raw in s[1:].split("/"):
        m = _STEP_RE.match(raw)
        if m is None:
            raise SelectorSyntax(f"bad selector step: {raw!r}")
        attr = (m.group("an"), m.group("av")) if m.group("an") else None
        index = int(m.group("ix")) if m.group("ix") is not None else None
        steps.append(Step(m.group("tag"), attr, index))
    if not steps:
        raise SelectorSyntax("empty selector")
    return PathSel(tuple(steps))


def print_sel(sel) -> str:
    if isinstance(sel, NodeRef):
        return f"@{sel.nid}"
    out = []
    for st in sel.steps:
        if st.attr is not None:
            out.append(f"{st.tag}[{st.attr[0]}='{st.attr[1]}']")
        elif st.index is not None:
            out.append(f"{st.tag}[{st.index}]")
        else:
            out.append(st.tag)
    return "/" + "/".join(out)


def _step_matches(step: Step, candidates):
    """Filter an element's children list down to the nodes a step selects.

    The index filter counts same-tag siblings only, zero-based."""
    same_tag = [c for c in candidates if isinstance(c, Elem) and c.tag == step.tag]
    if step.attr is not None:
        name, value = step.attr
        return [c for c in same_tag if c.attrs.get(name) == value]
    if step.index is not None:
        return same_tag[step.index : step.index + 1]
    return same_tag


def resolve(root: Elem, sel) -> list:
    if isinstance(sel, NodeRef):
        hit = find_by_nid(root, sel.nid)
        return [hit] if hit is not None else []
    current = [root]
    for st in sel.steps:
        nxt = []
        for n in current:
            if isinstance(n, Elem):
                nxt.extend(_step_matches(st, n.children))
        current = nxt
    return current


def steps_compat(a, b) -> bool:
    """Could two step lists (written against the same document) denote the
    same nodes? Tags must agree; filters must not contradict."""
    if len(a) != len(b):
        return False
    for sa, sb in zip(a, b):
        if sa.tag != sb.tag:
            return False
        if sa.attr is not None and sb.attr is not None and sa.attr != sb.attr:
            return False
        if sa.index is not None and sb.index is not None and sa.index != sb.index:
            return False
    return True


# ---------------------------------------------------------------------------
# edits


@dataclass
class ChangeTag:
    sel: Selector
    tag: str
    child_tags: dict = field(default_factory=dict)
    author: str = ""
    seq: int = 0


@dataclass
class Wrap:
    sel: Selector
    tag: str
    author: str = ""
    seq: int = 0


@dataclass
class SplitText:
    sel: Selector
    sep: str
    part_tag: str
    author: str = ""
    seq: int = 0


@dataclass
class AddColumn:
    sel: Selector  # the table
    header: str
    default: str = ""
    author: str = ""
    seq: int = 0


@dataclass
class InsertItem:
    sel: Selector  # the parent
    index: int
    subtree: Node
    author: str = ""
    seq: int = 0
    # (child_index, header, default) for cells a transport appended
    addcol_cells: list = field(default_factory=list)


@dataclass
class Reorder:
    sel: Selector  # the parent whose children get sorted
    key: str = "text"
    author: str = ""
    seq: int = 0


@dataclass
class SetText:
    sel: Selector
    content: str
    author: str = ""
    seq: int = 0


@dataclass
class _Resplit:
    """Internal composite: set a node's text, then re-split it the way an
    earlier SplitText did. Produced by transport only."""

    sel: Selector
    content: str
    sep: str
    part_tag: str
    author: str = ""
    seq: int = 0


SCHEMA_EDITS = (ChangeTag, Wrap, SplitText, AddColumn)
DATA_EDITS = (InsertItem, Reorder, SetText, _Resplit)
Edit = ChangeTag | Wrap | SplitText | AddColumn | InsertItem | Reorder | SetText | _Resplit


def is_schema_edit(e) -> bool:
    return isinstance(e, SCHEMA_EDITS)


def _edit_args(e):
    """The edit's content, minus its stamp — used for duplicate detection."""
    if isinstance(e, ChangeTag):
        return ("change-tag", e.sel, e.tag, tuple(sorted(e.child_tags.items())))
    if isinstance(e, Wrap):
        return ("wrap", e.sel, e.tag)
    if isinstance(e, SplitText):
        return ("split-text", e.sel, e.sep, e.part_tag)
    if isinstance(e, AddColumn):
        return ("add-column", e.sel, e.header, e.default)
    raise TypeError(e)


# ---------------------------------------------------------------------------
# application


@dataclass(frozen=True)
class CellRecord:
    cell: str  # nid
    row: str  # nid
    header: str
    default: str


@dataclass(frozen=True)
class ApplyResult:
    matched: tuple  # nids the edit acted on
    cells: tuple = ()  # CellRecords for cells minted by this application


def _split_children(e: Elem, sep: str, part_tag: str):
    [t] = e.children
    parts = t.content.split(sep)
    e.children = [
        Elem(part_tag, {}, [Text(p, f"{e.nid}.s{i}.t")], f"{e.nid}.s{i}")
        for i, p in enumerate(parts)
    ]


def _sort_key(n: Node) -> str:
    return get_text(n)


def _stamp_subtree(root: Node, prefix: str):
    counter = 0

    def walk(n):
        nonlocal counter
        n.nid = f"{prefix}.{counter}"
        counter += 1
        if isinstance(n, Elem):
            for c in n.children:
                walk(c)

    walk(root)


def apply_edit(doc: Elem, e) -> ApplyResult:
    """Apply one edit in place. Raises SelectorMiss when nothing matches."""
    matched = resolve(doc, e.sel)
    if not matched:
        raise SelectorMiss(f"selector {print_sel(e.sel)} matches nothing")
    nids = tuple(n.nid for n in matched)

    if isinstance(e, ChangeTag):
        for n in matched:
            n.tag = e.tag
            for c in n.children:
                if isinstance(c, Elem) and c.tag in e.child_tags:
                    c.tag = e.child_tags[c.tag]
        return ApplyResult(nids)

    if isinstance(e, Wrap):
        # group the matched nodes per parent; one wrapper per parent
        by_parent = []
        for n in matched:
            hit = parent_of(doc, n)
            if hit is None:
                raise SelectorMiss("cannot wrap the document root")
            parent, _ = hit
            for p, members in by_parent:
                if p is parent:
                    members.append(n)
                    break
            else:
                by_parent.append((parent, [n]))
        for parent, members in by_parent:
            first = min(parent.children.index(m) for m in members)
            wrapper = Elem(e.tag, {}, members, f"{parent.nid}.w.{e.author}.{e.seq}")
            parent.children = [c for c in parent.children if c not in members]
            parent.children.insert(first, wrapper)
        return ApplyResult(nids)

    if isinstance(e, SplitText):
        for n in matched:
            if isinstance(n, Elem) and len(n.children) == 1 and isinstance(n.children[0], Text):
                _split_children(n, e.sep, e.part_tag)
        return ApplyResult(nids)

    if isinstance(e, AddColumn):
        cells = []
        for table in matched:
            if not isinstance(table, Elem):
                continue
            tbody = next(
                (c for c in table.children if isinstance(c, Elem) and c.tag == "tbody"),
                None,
            )
            host = tbody if tbody is not None else table
            rows = [c for c in host.children if isinstance(c, Elem) and c.tag == "tr"]
            for row in rows:
                cell = Elem(
                    "td",
                    {},
                    [Text(e.default, f"{row.nid}.c.{e.header}.t")],
                    f"{row.nid}.c.{e.header}",
                )
                row.children.append(cell)
                cells.append(CellRecord(cell.nid, row.nid, e.header, e.default))
            thead = next(
                (c for c in table.children if isinstance(c, Elem) and c.tag == "thead"),
                None,
            )
            if thead is not None:
                hrow = next(
                    (c for c in thead.children if isinstance(c, Elem) and c.tag == "tr"),
                    None,
                )
                if hrow is not None:
                    hrow.children.append(
                        Elem(
                            "th",
                            {},
                            [Text(e.header, f"{hrow.nid}.c.{e.header}.t")],
                            f"{hrow.nid}.c.{e.header}",
                        )
                    )
        return ApplyResult(nids, tuple(cells))

    if isinstance(e, InsertItem):
        cells = []
        for pi, parent in enumerate(matched):
            if not isinstance(parent, Elem):
                continue
            sub = copy.deepcopy(e.subtree)
            _stamp_subtree(sub, f"{e.author}.{e.seq}.{pi}")
            at = max(0, min(e.index, len(parent.children)))
            parent.children.insert(at, sub)
            for child_index, header, default in e.addcol_cells:
                if isinstance(sub, Elem) and child_index < len(sub.children):
                    cell = sub.children[child_index]
                    cells.append(CellRecord(cell.nid, sub.nid, header, default))
        return ApplyResult(nids, tuple(cells))

    if isinstance(e, Reorder):
        if e.key != "text":
            raise SchemakitError(f"unknown ordering key {e.key!r}")
        for n in matched:
            if isinstance(n, Elem):
                n.children = sorted(n.children, key=_sort_key)
        return ApplyResult(nids)

    if isinstance(e, SetText):
        for n in matched:
            if isinstance(n, Text):
                n.content = e.content
            else:
                n.children = [Text(e.content, f"{n.nid}.t")]
        return ApplyResult(nids)

    if isinstance(e, _Resplit):
        for n in matched:
            if isinstance(n, Elem):
                n.children = [Text(e.content, f"{n.nid}.t")]
                _split_children(n, e.sep, e.part_tag)
        return ApplyResult(nids)

    raise TypeError(f"not an edit: {e!r}")


@dataclass(frozen=True)
class FoldResult:
    doc: Elem
    notes: tuple


def fold(doc: Elem, edits) -> FoldResult:
    """Replay a log from a starting document. Selector misses are noted,
    not fatal — a replayed log must never wedge."""
    out = copy.deepcopy(doc)
    notes = []
    for e in edits:
        try:
            apply_edit(out, e)
        except SelectorMiss as miss:
            notes.append(f"{e.author}/{e.seq}: {miss}")
    return FoldResult(out, tuple(notes))


# ---------------------------------------------------------------------------
# path rewriting through structural edits


def rewrite_path(steps, e):
    """Rewrite a path (tuple of Steps) so it denotes the same nodes after
    the edit. Raises Unrewritable when the path's meaning cannot survive
    (an index filter under a reordered parent)."""
    steps = tuple(steps)
    if isinstance(e.sel, NodeRef):
        return steps  # identity-addressed edits don't move paths

    k = len(e.sel.steps)

    if isinstance(e, ChangeTag):
        if len(steps) >= k and steps_compat(steps[:k], e.sel.steps):
            out = list(steps)
            old = out[k - 1]
            out[k - 1] = Step(e.tag, old.attr, old.index)
            if len(out) > k and out[k].tag in e.child_tags:
                nxt = out[k]
                out[k] = Step(e.child_tags[nxt.tag], nxt.attr, nxt.index)
            return tuple(out)
        return steps

    if isinstance(e, Wrap):
        if len(steps) >= k and steps_compat(steps[:k], e.sel.steps):
            out = list(steps)
            out.insert(k - 1, Step(e.tag))
            return tuple(out)
        return steps

    if isinstance(e, Reorder):
        if len(steps) > k and steps_compat(steps[:k], e.sel.steps):
            if steps[k].index is not None:
                raise Unrewritable(
                    "an index under a reordered parent no longer names the same node"
                )
        return steps

    if isinstance(e, InsertItem):
        if len(steps) > k and steps_compat(steps[:k], e.sel.steps):
            st = steps[k]
            if (
                st.index is not None
                and isinstance(e.subtree, Elem)
                and e.subtree.tag == st.tag
                and e.index <= st.index
            ):
                out = list(steps)
                out[k] = Step(st.tag, st.attr, st.index + 1)
                return tuple(out)
        return steps

    # SplitText, AddColumn, SetText leave existing paths alone
    return steps


# ---------------------------------------------------------------------------
# transporting content edits through structural edits


def _subtree_single_text(sub: Node):
    if (
        isinstance(sub, Elem)
        and len(sub.children) == 1
        and isinstance(sub.children[0], Text)
    ):
        return sub.children[0]
    return None


def transport_edit(d, s, s_matched=()):
    """Rewrite the content edit `d` so that applying it *after* the
    structural edit `s` means what the author meant *before* it.
    `s_matched` is the set of nids `s` acted on, when known."""
    d = copy.deepcopy(d)

    if isinstance(d, (SetText, _Resplit)) and isinstance(d.sel, NodeRef):
        if isinstance(s, SplitText) and d.sel.nid in s_matched:
            if isinstance(d, SetText):
                return _Resplit(d.sel, d.content, s.sep, s.part_tag, d.author, d.seq)
            return _Resplit(d.sel, d.content, s.sep, s.part_tag, d.author, d.seq)
        return d

    if isinstance(d.sel, NodeRef):
        return d

    psteps = d.sel.steps

    if isinstance(d, InsertItem):
        sub = d.subtree
        if isinstance(s, SplitText) and not isinstance(s.sel, NodeRef):
            if steps_compat(s.sel.steps[:-1], psteps) and (
                isinstance(sub, Elem) and sub.tag == s.sel.steps[-1].tag
            ):
                t = _subtree_single_text(sub)
                if t is not None:
                    parts = t.content.split(s.sep)
                    sub.children = [
                        Elem(s.part_tag, {}, [Text(p)]) for p in parts
                    ]
            return d
        if isinstance(s, ChangeTag):
            renames = steps_compat(psteps, s.sel.steps)
            d.sel = PathSel(rewrite_path(psteps, s))
            if renames and isinstance(sub, Elem) and sub.tag in s.child_tags:
                sub.tag = s.child_tags[sub.tag]
            return d
        if isinstance(s, Wrap) and not isinstance(s.sel, NodeRef):
            if steps_compat(s.sel.steps[:-1], psteps) and (
                isinstance(sub, Elem) and sub.tag == s.sel.steps[-1].tag
            ):
                d.sel = PathSel(psteps + (Step(s.tag),))
            else:
                d.sel = PathSel(rewrite_path(psteps, s))
            return d
        if isinstance(s, AddColumn) and not isinstance(s.sel, NodeRef):
            tsteps = s.sel.steps
            into_tbody = (
                len(psteps) == len(tsteps) + 1
                and steps_compat(psteps[:-1], tsteps)
                and psteps[-1].tag == "tbody"
            )
            into_table = steps_compat(psteps, tsteps)
            if (into_tbody or into_table) and isinstance(sub, Elem) and sub.tag == "tr":
                sub.children.append(Elem("td", {}, [Text(s.default)]))
                d.addcol_cells.append((len(sub.children) - 1, s.header, s.default))
            return d
        return d

    if isinstance(d, Reorder):
        if isinstance(s, Wrap) and not isinstance(s.sel, NodeRef):
            if steps_compat(s.sel.steps[:-1], psteps):
                d.sel = PathSel(psteps + (Step(s.tag),))
                return d
        d.sel = PathSel(rewrite_path(psteps, s))
        return d

    if isinstance(d, (SetText, _Resplit)):
        if isinstance(s, SplitText) and not isinstance(s.sel, NodeRef):
            if steps_compat(psteps, s.sel.steps) and isinstance(d, SetText):
                return _Resplit(d.sel, d.content, s.sep, s.part_tag, d.author, d.seq)
        d.sel = PathSel(rewrite_path(psteps, s))
        return d

    return d


# ---------------------------------------------------------------------------
# merge


@dataclass(frozen=True)
class Conflict:
    kind: str
    first: tuple  # (author, seq), ordered by that stamp — not by argument order
    second: tuple
    nids: tuple


@dataclass(frozen=True)
class Question:
    cell: str  # nid
    row: str  # nid
    header: str
    context: str


@dataclass(frozen=True)
class MergeResult:
    doc: Elem
    conflicts: tuple
    questions: tuple
    notes: tuple


def _check_log(edits):
    author, last = None, None
    for e in edits:
        if not e.author:
            raise BadLog("every edit needs an author stamp")
        if author is None:
            author = e.author
        elif e.author != author:
            raise BadLog("a log holds edits from a single author")
        if last is not None and e.seq <= last:
            raise BadLog("seq numbers must increase within a log")
        last = e.seq
    return author


def _own_context_matches(base, edits):
    """Replay a log on its own and record, for each structural edit, the
    nids it acted on in its author's view."""
    doc = copy.deepcopy(base)
    out = {}
    for e in edits:
        try:
            r = apply_edit(doc, e)
            if is_schema_edit(e):
                out[(e.author, e.seq)] = frozenset(r.matched)
        except SelectorMiss:
            if is_schema_edit(e):
                out[(e.author, e.seq)] = frozenset()
    return out


def _contend(a, b):
    """Do two structural edits fight over the same decision? AddColumn
    only contends with an AddColumn for the same header; the other kinds
    contend whenever they differ at all."""
    if type(a) is not type(b):
        return False
    if isinstance(a, AddColumn) and a.header != b.header:
        return False
    return _edit_args(a) != _edit_args(b)


def merge(base: Elem, ours, theirs, author_priority=None) -> MergeResult:
    """Three-way merge of two edit logs over a shared base document.

    Symmetric by construction: both phases order the union of edits by
    (author, seq), so swapping the arguments changes nothing."""
    a_author, b_author = _check_log(ours), _check_log(theirs)
    if a_author is not None and a_author == b_author:
        raise BadLog("the two logs must come from different authors")

    own_matches = {}
    own_matches.update(_own_context_matches(base, ours))
    own_matches.update(_own_context_matches(base, theirs))

    logs = {a_author: list(ours), b_author: list(theirs)}
    schema = sorted(
        (e for log in logs.values() for e in log if is_schema_edit(e)),
        key=lambda e: (e.author, e.seq),
    )

    # duplicate suppression: identical structural edits apply once
    skipped, notes, conflicts = set(), [], []
    seen_args = {}
    for e in schema:
        args = _edit_args(e)
        if args in seen_args and seen_args[args] != e.author:
            skipped.add((e.author, e.seq))
            notes.append(f"{e.author}/{e.seq}: duplicate of {seen_args[args]}'s edit")
        else:
            seen_args.setdefault(args, e.author)

    # conflicts: same-kind edits from different authors pulling the same
    # nodes in different directions
    for i, ea in enumerate(schema):
        for eb in schema[i + 1 :]:
            if ea.author == eb.author or not _contend(ea, eb):
                continue
            shared = own_matches.get((ea.author, ea.seq), frozenset()) & own_matches.get(
                (eb.author, eb.seq), frozenset()
            )
            if not shared:
                continue
            conflicts.append(
                Conflict(
                    type(ea).__name__,
                    (ea.author, ea.seq),
                    (eb.author, eb.seq),
                    tuple(sorted(shared)),
                )
            )
            if author_priority == ea.author:
                skipped.add((eb.author, eb.seq))
            elif author_priority == eb.author:
                skipped.add((ea.author, ea.seq))
            else:
                skipped.add((ea.author, ea.seq))
                skipped.add((eb.author, eb.seq))

    doc = copy.deepcopy(base)
    applied = []  # (edit, matched nids in the merged doc)
    cells = []
    for e in schema:
        if (e.author, e.seq) in skipped:
            continue
        try:
            r = apply_edit(doc, e)
            applied.append((e, frozenset(r.matched)))
            cells.extend(r.cells)
        except SelectorMiss as miss:
            notes.append(f"{e.author}/{e.seq}: {miss}")

    # content edits, each transported through the structural edits its
    # author had not seen: the other log's, plus their own later ones
    data = sorted(
        (
            (e, author, pos)
            for author, log in logs.items()
            for pos, e in enumerate(log)
            if not is_schema_edit(e)
        ),
        key=lambda t: (t[0].author, t[0].seq),
    )
    positions = {
        (e.author, e.seq): pos
        for log in logs.values()
        for pos, e in enumerate(log)
    }
    for e, author, pos in data:
        d = e
        for s, matched in applied:
            if s.author == author and positions[(s.author, s.seq)] < pos:
                continue  # the author already saw this one
            d = transport_edit(d, s, matched)
        try:
            r = apply_edit(doc, d)
            cells.extend(r.cells)
        except SelectorMiss as miss:
            notes.append(f"{e.author}/{e.seq}: {miss}")

    questions = []
    seen_cells = set()
    for rec in cells:
        if rec.cell in seen_cells:
            continue
        seen_cells.add(rec.cell)
        node = find_by_nid(doc, rec.cell)
        if node is None or get_text(node) != rec.default:
            continue
        row = find_by_nid(doc, rec.row)
        context = ""
        if isinstance(row, Elem):
            context = ", ".join(
                get_text(c) for c in row.children if c is not node and get_text(c)
            )
        questions.append(Question(rec.cell, rec.row, rec.header, context))
    questions.sort(key=lambda q: q.cell)

    return MergeResult(doc, tuple(conflicts), tuple(questions), tuple(notes))


# ---------------------------------------------------------------------------
# JSON forms


def sel_to_obj(sel):
    if isinstance(sel, NodeRef):
        return {"nid": sel.nid}
    return print_sel(sel)


def sel_from_obj(obj):
    if isinstance(obj, dict):
        return NodeRef(obj["nid"])
    return parse_sel(obj)


def edit_to_obj(e) -> dict:
    base = {"author": e.author, "seq": e.seq, "sel": sel_to_obj(e.sel)}
    if isinstance(e, ChangeTag):
        return {"kind": "change-tag", "tag": e.tag, "child-tags": dict(e.child_tags), **base}
    if isinstance(e, Wrap):
        return {"kind": "wrap", "tag": e.tag, **base}
    if isinstance(e, SplitText):
        return {"kind": "split-text", "sep": e.sep, "part-tag": e.part_tag, **base}
    if isinstance(e, AddColumn):
        return {"kind": "add-column", "header": e.header, "default": e.default, **base}
    if isinstance(e, InsertItem):
        return {
            "kind": "insert-item",
            "index": e.index,
            "subtree": node_to_obj(e.subtree, with_nids=False),
            **base,
        }
    if isinstance(e, Reorder):
        return {"kind": "reorder", "key": e.key, **base}
    if isinstance(e, SetText):
        return {"kind": "set-text", "content": e.content, **base}
    raise TypeError(f"not a serializable edit: {e!r}")


def edit_from_obj(obj) -> Edit:
    kind = obj["kind"]
    sel = sel_from_obj(obj["sel"])
    author, seq = obj.get("author", ""), obj.get("seq", 0)
    if kind == "change-tag":
        return ChangeTag(sel, obj["tag"], dict(obj.get("child-tags", {})), author, seq)
    if kind == "wrap":
        return Wrap(sel, obj["tag"], author, seq)
    if kind == "split-text":
        return SplitText(sel, obj["sep"], obj["part-tag"], author, seq)
    if kind == "add-column":
        return AddColumn(sel, obj["header"], obj.get("default", ""), author, seq)
    if kind == "insert-item":
        return InsertItem(sel, obj["index"], node_from_obj(obj["subtree"]), author, seq)
    if kind == "reorder":
        return Reorder(sel, obj.get("key", "text"), author, seq)
    if kind == "set-text":
        return SetText(sel, obj["content"], author, seq)
    raise SchemakitError(f"unknown edit kind {kind!r}")


def question_to_obj(q: Question) -> dict:
    return {"cell": q.cell, "row": q.row, "header": q.header, "context": q.context}


def conflict_to_obj(c: Conflict) -> dict:
    return {
        "kind": c.kind,
        "first": list(c.first),
        "second": list(c.second),
        "nids": list(c.nids),
    }
