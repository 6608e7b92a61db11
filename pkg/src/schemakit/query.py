"""A deliberately small SQL subset, kept in lockstep with entity evolutions.

    SELECT col, ... FROM T [JOIN U ON a = b]* [WHERE pred [AND pred]*] [;]

Columns are bare or table-qualified; predicates are `col IS NULL` and
`col = literal`. No aliases, grouping, or subqueries — the point is that
every query in the subset can be rewritten mechanically when an extraction
moves its columns into a new entity table, inserting the join that the
correspondence implies.

parse/print round-trip: printing is canonical (uppercase keywords, single
spaces, trailing semicolon); parsing accepts any whitespace and keyword
case but preserves identifier spelling.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .database import Database
from .entity import Correspondence
from .errors import SchemakitError


class QuerySyntaxError(SchemakitError):
    code = "query-syntax"

    def __init__(self, message, token_index=None, line=None, col=None):
        super().__init__(message, token=token_index, line=line, col=col)
        self.token_index = token_index
        self.line = line
        self.col = col


class UnknownTable(SchemakitError):
    code = "unknown-table"


class UnknownColumn(SchemakitError):
    code = "unknown-column"


class AmbiguousColumn(SchemakitError):
    code = "ambiguous-column"


class CannotRewrite(SchemakitError):
    code = "cannot-rewrite"


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class ColRef:
    table: str | None
    name: str


@dataclass(frozen=True)
class Literal:
    value: int | str | bool


@dataclass(frozen=True)
class IsNull:
    col: ColRef


@dataclass(frozen=True)
class Equals:
    col: ColRef
    value: Literal


Pred = IsNull | Equals


@dataclass(frozen=True)
class Join:
    table: str
    left: ColRef
    right: ColRef


@dataclass(frozen=True)
class Query:
    select: tuple  # of ColRef
    table: str
    joins: tuple = ()  # of Join
    where: tuple = ()  # of Pred

    def __post_init__(self):
        object.__setattr__(self, "select", tuple(self.select))
        object.__setattr__(self, "joins", tuple(self.joins))
        object.__setattr__(self, "where", tuple(self.where))


# ---------------------------------------------------------------------------
# lexer / parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<int>-?\d+)"
    r"|(?P<string>'[^']*')"
    r"|(?P<punct>[,.;=()]))"
)

_KEYWORDS = {"SELECT", "FROM", "JOIN", "ON", "WHERE", "IS", "NULL", "AND", "TRUE", "FALSE"}


@dataclass(frozen=True)
class _Tok:
    kind: str  # kw | ident | int | string | punct
    text: str
    index: int  # 1-based token index
    line: int
    col: int


def _lex(text: str) -> list:
    toks, pos, index = [], 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            line = text.count("\n", 0, pos) + 1
            col = pos - (text.rfind("\n", 0, pos) + 1) + 1
            raise QuerySyntaxError(
                f"unexpected character {text[pos:].strip()[0]!r}",
                token_index=index + 1,
                line=line,
                col=col,
            )
        index += 1
        start = m.start() + len(m.group(0)) - len(m.group(0).lstrip())
        line = text.count("\n", 0, start) + 1
        col = start - (text.rfind("\n", 0, start) + 1) + 1
        if m.group("ident") is not None:
            word = m.group("ident")
            kind = "kw" if word.upper() in _KEYWORDS else "ident"
            toks.append(_Tok(kind, word.upper() if kind == "kw" else word, index, line, col))
        elif m.group("int") is not None:
            toks.append(_Tok("int", m.group("int"), index, line, col))
        elif m.group("string") is not None:
            toks.append(_Tok("string", m.group("string"), index, line, col))
        else:
            toks.append(_Tok("punct", m.group("punct"), index, line, col))
        pos = m.end()
    return toks


class _Parser:
    def __init__(self, toks):
        self.toks = toks
        self.i = 0

    def _err(self, message):
        if self.i < len(self.toks):
            t = self.toks[self.i]
            raise QuerySyntaxError(message, t.index, t.line, t.col)
        last = self.toks[-1] if self.toks else None
        raise QuerySyntaxError(
            message + " (at end of input)",
            (last.index + 1) if last else 1,
            last.line if last else 1,
            last.col if last else 1,
        )

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take_kw(self, word):
        t = self.peek()
        if t is None or t.kind != "kw" or t.text != word:
            self._err(f"expected {word}")
        self.i += 1
        return t

    def try_kw(self, word):
        t = self.peek()
        if t is not None and t.kind == "kw" and t.text == word:
            self.i += 1
            return True
        return False

    def take_ident(self):
        t = self.peek()
        if t is None or t.kind != "ident":
            self._err("expected an identifier")
        self.i += 1
        return t.text

    def try_punct(self, ch):
        t = self.peek()
        if t is not None and t.kind == "punct" and t.text == ch:
            self.i += 1
            return True
        return False

    def take_punct(self, ch):
        if not self.try_punct(ch):
            self._err(f"expected {ch!r}")

    def colref(self) -> ColRef:
        first = self.take_ident()
        if self.try_punct("."):
            return ColRef(first, self.take_ident())
        return ColRef(None, first)

    def literal(self) -> Literal:
        t = self.peek()
        if t is None:
            self._err("expected a literal")
        if t.kind == "int":
            self.i += 1
            return Literal(int(t.text))
        if t.kind == "string":
            self.i += 1
            return Literal(t.text[1:-1])
        if t.kind == "kw" and t.text in ("TRUE", "FALSE"):
            self.i += 1
            return Literal(t.text == "TRUE")
        self._err("expected a literal")

    def pred(self) -> Pred:
        col = self.colref()
        if self.try_kw("IS"):
            self.take_kw("NULL")
            return IsNull(col)
        self.take_punct("=")
        return Equals(col, self.literal())

    def query(self) -> Query:
        self.take_kw("SELECT")
        select = [self.colref()]
        while self.try_punct(","):
            select.append(self.colref())
        self.take_kw("FROM")
        table = self.take_ident()
        joins = []
        while self.try_kw("JOIN"):
            jt = self.take_ident()
            self.take_kw("ON")
            left = self.colref()
            self.take_punct("=")
            right = self.colref()
            joins.append(Join(jt, left, right))
        where = []
        if self.try_kw("WHERE"):
            where.append(self.pred())
            while self.try_kw("AND"):
                where.append(self.pred())
        self.try_punct(";")
        if self.peek() is not None:
            self._err("trailing input after the query")
        return Query(tuple(select), table, tuple(joins), tuple(where))


def parse_query(text: str) -> Query:
    return _Parser(_lex(text)).query()


def _print_col(c: ColRef) -> str:
    return f"{c.table}.{c.name}" if c.table else c.name


def _print_literal(lit: Literal) -> str:
    if isinstance(lit.value, bool):
        return "TRUE" if lit.value else "FALSE"
    if isinstance(lit.value, int):
        return str(lit.value)
    return f"'{lit.value}'"


def print_query(q: Query) -> str:
    parts = ["SELECT ", ", ".join(_print_col(c) for c in q.select)]
    parts.append(f" FROM {q.table}")
    for j in q.joins:
        parts.append(f" JOIN {j.table} ON {_print_col(j.left)} = {_print_col(j.right)}")
    if q.where:
        preds = []
        for p in q.where:
            if isinstance(p, IsNull):
                preds.append(f"{_print_col(p.col)} IS NULL")
            else:
                preds.append(f"{_print_col(p.col)} = {_print_literal(p.value)}")
        parts.append(" WHERE " + " AND ".join(preds))
    parts.append(";")
    return "".join(parts)


def tokens_of(text: str) -> list:
    """Token text sequence, for whitespace-insensitive comparison."""
    return [t.text for t in _lex(text)]


# ---------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class ResultSet:
    columns: tuple
    rows: tuple

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))

    def equivalent(self, other: "ResultSet") -> bool:
        """Columns matched by name, rows compared as multisets."""
        if sorted(self.columns) != sorted(other.columns):
            return False
        perm = [other.columns.index(c) for c in self.columns]
        mine = sorted(map(_row_key, self.rows))
        theirs = sorted(
            _row_key(tuple(r[i] for i in perm)) for r in other.rows
        )
        return mine == theirs


def _row_key(row):
    return tuple((cell is None, str(type(cell).__name__), repr(cell)) for cell in row)


def _resolve(col: ColRef, scope: list) -> tuple:
    """scope: [(table_name, Table)] -> (table_name, col_index)."""
    if col.table is not None:
        for name, t in scope:
            if name == col.table:
                try:
                    return name, t.col_index(col.name)
                except Exception:
                    raise UnknownColumn(
                        f"no column {col.name!r} in {name!r}"
                    ) from None
        raise UnknownTable(f"table {col.table!r} is not in the query")
    hits = []
    for name, t in scope:
        for i, c in enumerate(t.columns):
            if c.name == col.name:
                hits.append((name, i))
    if not hits:
        raise UnknownColumn(f"no column {col.name!r} in scope")
    if len(hits) > 1:
        raise AmbiguousColumn(
            f"column {col.name!r} is ambiguous: " + ", ".join(n for n, _ in hits)
        )
    return hits[0]


def evaluate_query(db: Database, q: Query) -> ResultSet:
    if not db.has(q.table):
        raise UnknownTable(f"no table {q.table!r}")
    scope = [(q.table, db.table(q.table))]
    env_rows = [{q.table: row} for row in db.table(q.table).rows]

    for j in q.joins:
        if not db.has(j.table):
            raise UnknownTable(f"no table {j.table!r}")
        if any(n == j.table for n, _ in scope):
            raise UnknownTable(f"table {j.table!r} appears twice (no aliases)")
        jt = db.table(j.table)
        wide = scope + [(j.table, jt)]
        lt, li = _resolve(j.left, wide)
        rt_, ri = _resolve(j.right, wide)
        if (lt == j.table) == (rt_ == j.table):
            raise CannotRewrite(
                f"join condition must relate {j.table!r} to the tables before it"
            )
        joined = []
        for env in env_rows:
            for row in jt.rows:
                def cell_of(tname, idx):
                    return row[idx] if tname == j.table else env[tname][idx]

                lv, rv = cell_of(lt, li), cell_of(rt_, ri)
                if lv is not None and lv == rv:
                    joined.append({**env, j.table: row})
        env_rows = joined
        scope = wide

    resolved_where = [
        (p, _resolve(p.col, scope)) for p in q.where
    ]

    def keep(env):
        for p, (tname, idx) in resolved_where:
            cell = env[tname][idx]
            if isinstance(p, IsNull):
                if cell is not None:
                    return False
            else:
                if cell is None or cell != p.value.value:
                    return False
        return True

    resolved_select = [(c, _resolve(c, scope)) for c in q.select]
    out_rows = []
    for env in env_rows:
        if keep(env):
            out_rows.append(
                tuple(env[tname][idx] for _, (tname, idx) in resolved_select)
            )
    return ResultSet(tuple(c.name for c in q.select), tuple(out_rows))


# ---------------------------------------------------------------------------
# rewriting through a correspondence


def _ref_hits(col: ColRef, table: str, names) -> bool:
    if col.table is not None:
        return col.table == table and col.name in names
    return col.name in names


def rewrite_query(q: Query, corr: Correspondence) -> Query:
    """Rewrite a query across an extract (inserting the join) or an absorb
    (removing it). Queries not touching the moved columns pass through."""
    if corr.op == "extract-entity":
        return _rewrite_extract(q, corr)
    if corr.op == "absorb-entity":
        return _rewrite_absorb(q, corr)
    raise CannotRewrite(f"no rewrite through op {corr.op!r}")


def _rewrite_extract(q: Query, corr: Correspondence) -> Query:
    spec = corr.spec
    s, moved, n = spec.source, set(spec.columns), spec.new_table
    if q.table != s and all(j.table != s for j in q.joins):
        return q

    for j in q.joins:
        if j.table == n:
            raise CannotRewrite(f"query already joins {n!r}")

    def refs_moved(col: ColRef) -> bool:
        return _ref_hits(col, s, moved)

    any_moved = any(refs_moved(c) for c in q.select) or any(
        refs_moved(p.col) for p in q.where
    )
    for col in list(q.select) + [p.col for p in q.where]:
        if _ref_hits(col, s, {spec.fk, spec.new_key}):
            raise CannotRewrite(
                f"column {col.name!r} collides with the new key/reference names"
            )
    if not any_moved:
        return q

    def fix(col: ColRef) -> ColRef:
        if refs_moved(col):
            return ColRef(n if col.table is not None else None, col.name)
        return col

    select = tuple(fix(c) for c in q.select)
    where = tuple(
        IsNull(fix(p.col)) if isinstance(p, IsNull) else Equals(fix(p.col), p.value)
        for p in q.where
    )
    join = Join(n, ColRef(s, spec.fk), ColRef(n, spec.new_key))
    return Query(select, q.table, q.joins + (join,), where)


def _rewrite_absorb(q: Query, corr: Correspondence) -> Query:
    spec = corr.spec
    s, n = spec.source, spec.new_table
    touches = q.table == n or any(j.table == n for j in q.joins)
    if not touches:
        return q
    if q.table == n:
        raise CannotRewrite(
            f"{n!r} no longer exists on its own after the absorb"
        )

    removed = [
        j
        for j in q.joins
        if j.table == n
        and {(j.left.table, j.left.name), (j.right.table, j.right.name)}
        == {(s, spec.fk), (n, spec.new_key)}
    ]
    if not removed:
        raise CannotRewrite(f"the join on {n!r} is not the one the extract added")

    for col in list(q.select) + [p.col for p in q.where]:
        if _ref_hits(col, s, {spec.fk}) or _ref_hits(col, n, {spec.new_key}):
            raise CannotRewrite(
                f"column {col.name!r} disappears when {n!r} is absorbed"
            )

    def fix(col: ColRef) -> ColRef:
        if col.table == n:
            return ColRef(s, col.name)
        return col

    select = tuple(fix(c) for c in q.select)
    where = tuple(
        IsNull(fix(p.col)) if isinstance(p, IsNull) else Equals(fix(p.col), p.value)
        for p in q.where
    )
    joins = tuple(j for j in q.joins if j not in removed)
    return Query(select, q.table, joins, where)
