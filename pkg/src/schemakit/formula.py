"""Small spreadsheet-style formulas whose inputs live inside a document.

A cell whose text starts with ``=`` holds a formula. Formulas combine
number literals, path references (the numeric reading of another node's
text, currency prefixes allowed), and COUNT over a path, with ``+`` and
``*``. Referenced cells may themselves hold formulas; cycles are an error
rather than a hang.

Because inputs are *paths*, formulas participate in structural evolution:
`rewrite_formula` maps a formula through a structural edit so it keeps
denoting the same data, and `invalidate` reports which formula hosts an
edit makes stale (transitively — a formula reading a stale cell is stale
too).
"""

from __future__ import annotations

import copy
import re
from dataclasses import dataclass

from .doc import (
    Elem,
    SelectorMiss,
    Text,
    Wrap,
    apply_edit,
    get_text,
    parent_of,
    parse_sel,
    print_sel,
    PathSel,
    resolve,
    rewrite_path,
)
from .errors import SchemakitError


class FormulaSyntax(SchemakitError):
    code = "formula-syntax"


class NotNumeric(SchemakitError):
    code = "not-numeric"


class FormulaCycle(SchemakitError):
    code = "formula-cycle"


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: int | float


@dataclass(frozen=True)
class PathRef:
    steps: tuple


@dataclass(frozen=True)
class Count:
    steps: tuple


@dataclass(frozen=True)
class Add:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Mul:
    left: "Formula"
    right: "Formula"


Formula = Num | PathRef | Count | Add | Mul


# ---------------------------------------------------------------------------
# parse / print

_NUM_RE = re.compile(r"\d+(?:\.\d+)?")


class _Scanner:
    def __init__(self, text):
        self.text = text
        self.i = 0

    def _skip_ws(self):
        while self.i < len(self.text) and self.text[self.i].isspace():
            self.i += 1

    def peek(self):
        self._skip_ws()
        return self.text[self.i] if self.i < len(self.text) else ""

    def take_path(self) -> tuple:
        # a path runs to the next top-level delimiter; quotes protect
        # anything inside an attribute filter
        start = self.i
        quoted = False
        while self.i < len(self.text):
            ch = self.text[self.i]
            if ch == "'":
                quoted = not quoted
            elif not quoted and (ch.isspace() or ch in "+*()"):
                break
            self.i += 1
        raw = self.text[start : self.i]
        try:
            return parse_sel(raw).steps
        except SchemakitError as err:
            raise FormulaSyntax(f"bad path {raw!r}: {err}") from None

    def expect(self, ch):
        if self.peek() != ch:
            raise FormulaSyntax(f"expected {ch!r} at offset {self.i}")
        self.i += 1


def parse_formula(text: str):
    s = _Scanner(text.strip().removeprefix("="))
    f = _expr(s)
    if s.peek():
        raise FormulaSyntax(f"trailing input at offset {s.i}")
    return f


def _expr(s: _Scanner):
    f = _term(s)
    while s.peek() == "+":
        s.i += 1
        f = Add(f, _term(s))
    return f


def _term(s: _Scanner):
    f = _factor(s)
    while s.peek() == "*":
        s.i += 1
        f = Mul(f, _factor(s))
    return f


def _factor(s: _Scanner):
    ch = s.peek()
    if ch == "(":
        s.i += 1
        f = _expr(s)
        s.expect(")")
        return f
    if ch == "/":
        return PathRef(s.take_path())
    if ch.isdigit() or ch == ".":
        m = _NUM_RE.match(s.text, s.i)
        if m is None:
            raise FormulaSyntax(f"bad number at offset {s.i}")
        s.i = m.end()
        raw = m.group(0)
        return Num(float(raw) if "." in raw else int(raw))
    if s.text.startswith("COUNT", s.i):
        s.i += len("COUNT")
        s.expect("(")
        steps = s.take_path()
        s.expect(")")
        return Count(steps)
    raise FormulaSyntax(f"unexpected {ch!r} at offset {s.i}" if ch else "unexpected end")


def print_formula(f) -> str:
    if isinstance(f, Num):
        return str(f.value)
    if isinstance(f, PathRef):
        return print_sel(PathSel(f.steps))
    if isinstance(f, Count):
        return f"COUNT({print_sel(PathSel(f.steps))})"
    if isinstance(f, Add):
        return f"{print_formula(f.left)} + {print_formula(f.right)}"
    if isinstance(f, Mul):
        left = print_formula(f.left)
        right = print_formula(f.right)
        if isinstance(f.left, Add):
            left = f"({left})"
        if isinstance(f.right, Add):
            right = f"({right})"
        return f"{left} * {right}"
    raise TypeError(f)


# ---------------------------------------------------------------------------
# evaluation

_CURRENCY_PREFIX = re.compile(r"^[^\d+\-.]*")
_NUMBER = re.compile(r"[+-]?\d+(?:\.\d+)?$")


def _numeric(raw: str):
    stripped = _CURRENCY_PREFIX.sub("", raw.strip(), count=1)
    if not _NUMBER.match(stripped):
        raise NotNumeric(f"{raw!r} is not a number")
    return float(stripped) if "." in stripped else int(stripped)


def _resolve_with_reads(root, steps, reads):
    reads.add(root.nid)
    current = [root]
    for st in steps:
        nxt = []
        for n in current:
            if isinstance(n, Elem):
                for c in n.children:
                    if isinstance(c, Elem) and c.tag == st.tag:
                        if st.attr is not None and c.attrs.get(st.attr[0]) != st.attr[1]:
                            continue
                        nxt.append(c)
        if st.index is not None:
            nxt = nxt[st.index : st.index + 1] if st.index < len(nxt) else []
        current = nxt
        reads.update(n.nid for n in current)
    return current


def _all_nids(n, out):
    out.add(n.nid)
    if isinstance(n, Elem):
        for c in n.children:
            _all_nids(c, out)


def evaluate_with_reads(doc: Elem, f, _guard=None, _reads=None):
    """Evaluate a formula; also report every node the evaluation read, so
    callers can tell which edits would change the answer."""
    reads = set() if _reads is None else _reads
    guard = set() if _guard is None else _guard
    value = _eval(doc, f, guard, reads)
    return value, frozenset(reads)


def evaluate(doc: Elem, f):
    value, _ = evaluate_with_reads(doc, f)
    return value


def _eval(doc, f, guard, reads):
    if isinstance(f, Num):
        return f.value
    if isinstance(f, Count):
        matched = _resolve_with_reads(doc, f.steps, reads)
        return len(matched)
    if isinstance(f, PathRef):
        matched = _resolve_with_reads(doc, f.steps, reads)
        if not matched:
            raise SelectorMiss(f"{print_sel(PathSel(f.steps))} matches nothing")
        node = matched[0]
        _all_nids(node, reads)
        raw = get_text(node).strip()
        if raw.startswith("="):
            if node.nid in guard:
                raise FormulaCycle(f"formula at {node.nid} depends on itself")
            guard.add(node.nid)
            try:
                return _eval(doc, parse_formula(raw), guard, reads)
            finally:
                guard.discard(node.nid)
        return _numeric(raw)
    if isinstance(f, Add):
        return _eval(doc, f.left, guard, reads) + _eval(doc, f.right, guard, reads)
    if isinstance(f, Mul):
        return _eval(doc, f.left, guard, reads) * _eval(doc, f.right, guard, reads)
    raise TypeError(f)


# ---------------------------------------------------------------------------
# co-evolution


def rewrite_formula(f, edit):
    """Map every path in a formula through a structural edit. Raises
    Unrewritable when a path's meaning cannot survive the edit."""
    if isinstance(f, Num):
        return f
    if isinstance(f, PathRef):
        return PathRef(rewrite_path(f.steps, edit))
    if isinstance(f, Count):
        return Count(rewrite_path(f.steps, edit))
    if isinstance(f, Add):
        return Add(rewrite_formula(f.left, edit), rewrite_formula(f.right, edit))
    if isinstance(f, Mul):
        return Mul(rewrite_formula(f.left, edit), rewrite_formula(f.right, edit))
    raise TypeError(f)


def find_formulas(doc: Elem) -> list:
    """(nid, text) of every element hosting a formula: a single text child
    starting with '='. Depth-first order."""
    out = []

    def walk(n):
        if isinstance(n, Elem):
            if (
                len(n.children) == 1
                and isinstance(n.children[0], Text)
                and n.children[0].content.strip().startswith("=")
            ):
                out.append((n.nid, n.children[0].content.strip()))
            for c in n.children:
                walk(c)

    walk(doc)
    return out


def touched_nids(doc: Elem, edit) -> frozenset:
    """Which nodes does an edit disturb? Applied to a scratch copy."""
    touched = set()
    scratch = copy.deepcopy(doc)
    pre = resolve(scratch, edit.sel)
    if isinstance(edit, Wrap):
        for n in pre:
            hit = parent_of(scratch, n)
            if hit is not None:
                touched.add(hit[0].nid)
    try:
        r = apply_edit(scratch, edit)
    except SelectorMiss:
        return frozenset()
    touched.update(r.matched)
    touched.update(rec.row for rec in r.cells)
    return frozenset(touched)


def invalidate(doc: Elem, edit, hosts=None) -> tuple:
    """Hosts whose formulas an edit makes stale, including formulas that
    read other stale formula cells. `hosts` defaults to every formula in
    the document."""
    if hosts is None:
        hosts = find_formulas(doc)
    reads_of = {}
    for nid, raw in hosts:
        try:
            _, reads = evaluate_with_reads(doc, parse_formula(raw))
            reads_of[nid] = reads
        except SchemakitError:
            reads_of[nid] = None  # already broken: always considered stale

    touched = set(touched_nids(doc, edit))
    stale = {nid for nid, reads in reads_of.items() if reads is None}
    changed = True
    while changed:
        changed = False
        for nid, reads in reads_of.items():
            if nid in stale or reads is None:
                continue
            if reads & touched:
                stale.add(nid)
                touched.add(nid)
                changed = True
    return tuple(sorted(stale))
