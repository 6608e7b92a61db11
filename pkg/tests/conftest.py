"""Shared fixtures: the worked examples every suite leans on, plus seeded
generators for the bulk property runs.

The generators take an explicit random.Random so the counted suites are
reproducible; nothing here touches the global RNG.
"""

from __future__ import annotations

import random

import pytest

from schemakit.database import Column, Database, Table
from schemakit.doc import (
    AddColumn,
    ChangeTag,
    Elem,
    InsertItem,
    NodeRef,
    Reorder,
    SetText,
    SplitText,
    Text,
    Wrap,
    assign_nids,
    parse_sel,
)
from schemakit.entity import ExtractSpec, extract_entity
from schemakit.machine import (
    Assign,
    MachineDef,
    NotOp,
    StateDef,
    Transition,
    VarDecl,
)
from schemakit.query import ColRef, Equals, IsNull, Literal, Query
from schemakit import types as T


# ---------------------------------------------------------------------------
# the orders ledger (flat form) and its extraction


def orders_flat() -> Database:
    cols = (
        Column("oid", "id"),
        Column("item", "string"),
        Column("quantity", "int"),
        Column("ship_date", "datetime?"),
        Column("customer_name", "string"),
        Column("customer_address", "string"),
    )
    rows = (
        (1, "Anvil", 1, "2023-02-03", "Wile E Coyote", "123 Desert Station"),
        (2, "Dynamite", 2, None, "Daffy Duck", "White Rock Lake"),
        (3, "Bird Seed", 1, None, "Wile E Coyote", "123 Desert Station"),
    )
    return Database((("Orders", Table("oid", cols, rows)),))


def orders_spec() -> ExtractSpec:
    return ExtractSpec(
        "Orders", ("customer_name", "customer_address"), "Customers", "cid", "cid"
    )


PENDING_FLAT_SQL = (
    "SELECT oid, item, quantity, customer_name, customer_address "
    "FROM Orders WHERE ship_date IS NULL;"
)

PENDING_JOIN_SQL = (
    "SELECT oid, item, quantity, customer_name, customer_address "
    "FROM Orders JOIN Customers ON Orders.cid = Customers.cid "
    "WHERE ship_date IS NULL;"
)


@pytest.fixture
def orders_db():
    return orders_flat()


@pytest.fixture
def orders_extracted():
    db, corr = extract_entity(orders_flat(), orders_spec())
    return db, corr


# ---------------------------------------------------------------------------
# the speakers page and the two concurrent edit logs
#
# Base: a heading pair and a plain list of "Name, email" items. One author
# (alice) inserts a speaker and sorts the list; the other (bob) refactors
# the list into a table with an extra column and fills that column in.


def speakers_base() -> Elem:
    doc = Elem(
        "body",
        {},
        [
            Elem("h1", {}, [Text("Conference planning")]),
            Elem("h2", {}, [Text("Invited speakers")]),
            Elem(
                "ul",
                {"id": "speakers"},
                [
                    Elem("li", {}, [Text("Adele Goldberg, adele@xerox.com")]),
                    Elem("li", {}, [Text("Margaret Hamilton, hamilton@mit.com")]),
                    Elem("li", {}, [Text("Betty Jean Jennings, betty@rand.com")]),
                ],
            ),
        ],
    )
    assign_nids(doc)
    return doc


def alice_log():
    """Insert Ada at the top, then sort the list by its text."""
    ul = parse_sel("/ul[id='speakers']")
    return [
        InsertItem(
            ul,
            0,
            Elem("li", {}, [Text("Ada Lovelace, ada@rsoc.ac.uk")]),
            author="alice",
            seq=1,
        ),
        Reorder(ul, "text", author="alice", seq=2),
    ]


def bob_log():
    """Refactor the list into a table: split each item into cells, retag,
    wrap the rows, add a Who column, add a header row, assign owners."""
    return [
        SplitText(parse_sel("/ul[id='speakers']/li"), ", ", "td", author="bob", seq=1),
        ChangeTag(parse_sel("/ul[id='speakers']"), "table", {"li": "tr"}, author="bob", seq=2),
        Wrap(parse_sel("/table[id='speakers']/tr"), "tbody", author="bob", seq=3),
        AddColumn(parse_sel("/table[id='speakers']"), "Who", "", author="bob", seq=4),
        InsertItem(
            parse_sel("/table[id='speakers']"),
            0,
            Elem(
                "thead",
                {},
                [
                    Elem(
                        "tr",
                        {},
                        [
                            Elem("th", {}, [Text("Name")]),
                            Elem("th", {}, [Text("Email")]),
                            Elem("th", {}, [Text("Who")]),
                        ],
                    )
                ],
            ),
            author="bob",
            seq=5,
        ),
        SetText(NodeRef("n6.c.Who"), "TP", author="bob", seq=6),
        SetText(NodeRef("n8.c.Who"), "JE", author="bob", seq=7),
        SetText(NodeRef("n10.c.Who"), "JE", author="bob", seq=8),
    ]


def _cell(nid, text_nid, content):
    return {
        "tag": "td",
        "attrs": {},
        "children": [{"text": content, "nid": text_nid}],
        "nid": nid,
    }


def _row(nid, cells):
    return {"tag": "tr", "attrs": {}, "children": cells, "nid": nid}


# Derived by hand: phase one replays bob's four structural edits; phase two
# replays alice's insert (transported: pre-split into cells, retagged li->tr,
# routed into the tbody, given a default Who cell) and her reorder, then
# bob's header row and the three owner cells. The identities follow the
# documented derivation scheme, so this literal is checkable on paper.
SPEAKERS_MERGED = {
    "tag": "body",
    "attrs": {},
    "nid": "n0",
    "children": [
        {
            "tag": "h1",
            "attrs": {},
            "children": [{"text": "Conference planning", "nid": "n2"}],
            "nid": "n1",
        },
        {
            "tag": "h2",
            "attrs": {},
            "children": [{"text": "Invited speakers", "nid": "n4"}],
            "nid": "n3",
        },
        {
            "tag": "table",
            "attrs": {"id": "speakers"},
            "nid": "n5",
            "children": [
                {
                    "tag": "thead",
                    "attrs": {},
                    "nid": "bob.5.0.0",
                    "children": [
                        {
                            "tag": "tr",
                            "attrs": {},
                            "nid": "bob.5.0.1",
                            "children": [
                                {
                                    "tag": "th",
                                    "attrs": {},
                                    "children": [{"text": "Name", "nid": "bob.5.0.3"}],
                                    "nid": "bob.5.0.2",
                                },
                                {
                                    "tag": "th",
                                    "attrs": {},
                                    "children": [{"text": "Email", "nid": "bob.5.0.5"}],
                                    "nid": "bob.5.0.4",
                                },
                                {
                                    "tag": "th",
                                    "attrs": {},
                                    "children": [{"text": "Who", "nid": "bob.5.0.7"}],
                                    "nid": "bob.5.0.6",
                                },
                            ],
                        }
                    ],
                },
                {
                    "tag": "tbody",
                    "attrs": {},
                    "nid": "n5.w.bob.3",
                    "children": [
                        _row(
                            "alice.1.0.0",
                            [
                                _cell("alice.1.0.1", "alice.1.0.2", "Ada Lovelace"),
                                _cell("alice.1.0.3", "alice.1.0.4", "ada@rsoc.ac.uk"),
                                _cell("alice.1.0.5", "alice.1.0.6", ""),
                            ],
                        ),
                        _row(
                            "n6",
                            [
                                _cell("n6.s0", "n6.s0.t", "Adele Goldberg"),
                                _cell("n6.s1", "n6.s1.t", "adele@xerox.com"),
                                _cell("n6.c.Who", "n6.c.Who.t", "TP"),
                            ],
                        ),
                        _row(
                            "n10",
                            [
                                _cell("n10.s0", "n10.s0.t", "Betty Jean Jennings"),
                                _cell("n10.s1", "n10.s1.t", "betty@rand.com"),
                                _cell("n10.c.Who", "n10.c.Who.t", "JE"),
                            ],
                        ),
                        _row(
                            "n8",
                            [
                                _cell("n8.s0", "n8.s0.t", "Margaret Hamilton"),
                                _cell("n8.s1", "n8.s1.t", "hamilton@mit.com"),
                                _cell("n8.c.Who", "n8.c.Who.t", "JE"),
                            ],
                        ),
                    ],
                },
            ],
        },
    ],
}


# ---------------------------------------------------------------------------
# the doors machine


DOORS_SRC = """\
machine Doors

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
"""


# ---------------------------------------------------------------------------
# the todo app's state and events


def todo_item_type() -> T.Record:
    return T.Record(
        (("id", T.ID), ("title", T.STRING), ("completed", T.BOOL))
    )


def todo_state_type() -> T.Record:
    return T.Record((("items", T.ListOf(T.Named("Item"))),))


def todo_defs() -> dict:
    return {"Item": todo_item_type(), "State": todo_state_type()}


def todo_state() -> T.RecordVal:
    def item(i, title, done):
        return T.RecordVal(
            (
                ("id", T.IdVal(i)),
                ("title", T.StrVal(title)),
                ("completed", T.BoolVal(done)),
            )
        )

    return T.RecordVal(
        (
            (
                "items",
                T.ListVal((item(1, "Check Twitter", True), item(2, "Write the paper", False))),
            ),
        )
    )


def todo_events() -> T.Variant:
    return T.Variant(
        (
            ("SetTitle", (T.ID, T.STRING)),
            ("SetCompleted", (T.ID, T.BOOL)),
            ("Remove", (T.ID,)),
            ("Add", (T.STRING,)),
        )
    )


# ---------------------------------------------------------------------------
# seeded generators — databases, queries, docs, logs, machines, types


_WORDS = (
    "alpha", "bravo", "carol", "delta", "echo", "frank", "grace", "hotel",
    "india", "juliet", "kilo", "lima", "mike", "nora", "oscar", "papa",
)


def gen_flat_case(rng: random.Random):
    """A one-table database plus an extraction spec for it.

    The extracted attribute columns draw from a small pool of tuples so the
    de-duplication actually has work to do.
    """
    n_attr = rng.randint(1, 3)
    n_plain = rng.randint(1, 3)
    attr_cols = tuple(Column(f"a{i}", "string") for i in range(n_attr))
    plain_types = ("string", "int", "bool", "string?", "int?")
    plain_cols = tuple(
        Column(f"p{i}", rng.choice(plain_types)) for i in range(n_plain)
    )
    # attribute columns sometimes sit in the middle of the row, not the end
    mixed = list(plain_cols)
    for c in attr_cols:
        mixed.insert(rng.randint(0, len(mixed)), c)
    cols = (Column("k", "id"),) + tuple(mixed)

    pool = [
        tuple(rng.choice(_WORDS) + str(rng.randint(0, 3)) for _ in range(n_attr))
        for _ in range(rng.randint(1, 4))
    ]

    def plain_cell(c: Column):
        if c.optional and rng.random() < 0.35:
            return None
        if c.base_type == "string":
            return rng.choice(_WORDS)
        if c.base_type == "int":
            return rng.randint(-5, 20)
        return rng.random() < 0.5

    rows = []
    for k in range(1, rng.randint(1, 12) + 1):
        attrs = dict(zip((c.name for c in attr_cols), rng.choice(pool)))
        row = tuple(
            k if c.name == "k" else attrs.get(c.name, None) if c.name in attrs else plain_cell(c)
            for c in cols
        )
        rows.append(row)

    db = Database((("T", Table("k", cols, tuple(rows))),))
    spec = ExtractSpec("T", tuple(c.name for c in attr_cols), "E", "ek", "ef")
    return db, spec


def gen_query(rng: random.Random, db: Database, table: str) -> Query:
    """A query against one flat table, qualified and unqualified refs mixed."""
    t = db.table(table)

    def ref(c: Column) -> ColRef:
        return ColRef(table if rng.random() < 0.4 else None, c.name)

    selectable = list(t.columns)
    rng.shuffle(selectable)
    select = tuple(ref(c) for c in selectable[: rng.randint(1, len(selectable))])

    preds = []
    for _ in range(rng.randint(0, 2)):
        c = rng.choice(t.columns)
        if c.optional and rng.random() < 0.5:
            preds.append(IsNull(ref(c)))
        elif c.base_type == "string":
            ci = t.col_index(c.name)
            present = [r[ci] for r in t.rows if r[ci] is not None]
            value = rng.choice(present) if present and rng.random() < 0.7 else "nope"
            preds.append(Equals(ref(c), Literal(value)))
        elif c.base_type == "int":
            preds.append(Equals(ref(c), Literal(rng.randint(-5, 20))))
        elif c.base_type == "bool":
            preds.append(Equals(ref(c), Literal(rng.random() < 0.5)))
        else:  # the id key
            preds.append(Equals(ref(c), Literal(rng.randint(1, 12))))
    return Query(select, table, (), tuple(preds))


def gen_doc(rng: random.Random) -> Elem:
    """A small page: headings, lists of single-text items, loose paragraphs."""
    children = []
    for i in range(rng.randint(1, 3)):
        kind = rng.choice(("ul", "p", "section"))
        if kind == "ul":
            items = [
                Elem(
                    "li",
                    {},
                    [Text(f"{rng.choice(_WORDS)}, {rng.choice(_WORDS)}@x.com")],
                )
                for _ in range(rng.randint(1, 4))
            ]
            children.append(Elem("ul", {"id": f"list{i}"}, items))
        elif kind == "p":
            children.append(Elem("p", {}, [Text(rng.choice(_WORDS))]))
        else:
            children.append(
                Elem(
                    "section",
                    {},
                    [Elem("p", {}, [Text(rng.choice(_WORDS))]) for _ in range(rng.randint(1, 2))],
                )
            )
    doc = Elem("body", {}, children)
    assign_nids(doc)
    return doc


def _random_elem_path(rng: random.Random, doc: Elem):
    """(steps-string, element) for a random non-root element, or None."""
    paths = []

    def walk(n, steps):
        for c in n.children:
            if isinstance(c, Elem):
                step = c.tag
                if "id" in c.attrs:
                    step = f"{c.tag}[id='{c.attrs['id']}']"
                walk(c, steps + [step])
        if steps:
            paths.append(("/" + "/".join(steps), n))

    walk(doc, [])
    if not paths:
        return None
    return rng.choice(paths)


def gen_log(rng: random.Random, doc: Elem, author: str):
    """An edit log over `doc` from one author; selectors come from the tree
    itself so most edits land (misses are allowed and noted)."""
    edits = []
    for seq in range(1, rng.randint(1, 4) + 1):
        hit = _random_elem_path(rng, doc)
        if hit is None:
            break
        sel_text, node = hit
        sel = parse_sel(sel_text)
        kind = rng.randrange(6)
        if kind == 0:
            edits.append(
                ChangeTag(sel, rng.choice(("div", "table", "ol")), {"li": "tr"}, author, seq)
            )
        elif kind == 1:
            edits.append(SplitText(sel, ", ", "td", author, seq))
        elif kind == 2:
            edits.append(Wrap(sel, rng.choice(("wrapper", "tbody")), author, seq))
        elif kind == 3:
            edits.append(
                InsertItem(
                    sel,
                    rng.randint(0, 3),
                    Elem("li", {}, [Text(f"{rng.choice(_WORDS)}, new@x.com")]),
                    author,
                    seq,
                )
            )
        elif kind == 4:
            edits.append(Reorder(sel, "text", author, seq))
        else:
            edits.append(SetText(sel, rng.choice(_WORDS), author, seq))
    return edits


def gen_machine(rng: random.Random) -> MachineDef:
    n_states = rng.randint(2, 4)
    snames = [f"s{i}" for i in range(n_states)]
    vtypes = ("bool", "int", "string")
    vinit = {"bool": False, "int": 0, "string": ""}
    vars_ = tuple(
        VarDecl(f"v{i}", t, vinit[t])
        for i, t in enumerate(rng.choice(vtypes) for _ in range(rng.randint(1, 3)))
    )
    events = [f"e{i}" for i in range(4)]

    def entry_for():
        stmts = []
        for _ in range(rng.randint(0, 2)):
            v = rng.choice(vars_)
            if v.type == "bool" and rng.random() < 0.5:
                src = rng.choice([x for x in vars_ if x.type == "bool"])
                stmts.append(Assign(v.name, NotOp(src.name)))
            elif v.type == "bool":
                stmts.append(Assign(v.name, rng.random() < 0.5))
            elif v.type == "int":
                stmts.append(Assign(v.name, rng.randint(-3, 9)))
            else:
                stmts.append(Assign(v.name, rng.choice(_WORDS)))
        return tuple(stmts)

    states = []
    for name in snames:
        used, ts = set(), []
        for _ in range(rng.randint(0, 3)):
            e = rng.choice(events)
            if e in used:
                continue
            used.add(e)
            ts.append(Transition(e, rng.choice(snames)))
        states.append(StateDef(name, entry_for(), tuple(ts)))
    return MachineDef(f"m{rng.randint(0, 99)}", vars_, snames[0], tuple(states))


def gen_events(rng: random.Random, count=None) -> list:
    return [
        f"e{rng.randint(0, 4)}"  # e4 exists on no machine: some drops
        for _ in range(rng.randint(2, 8) if count is None else count)
    ]


def gen_type(rng: random.Random, depth: int = 0) -> T.TypeExpr:
    roll = rng.random()
    if depth >= 2 or roll < 0.35:
        return rng.choice((T.BOOL, T.INT, T.STRING, T.DATETIME, T.ID))
    if roll < 0.5:
        return T.Option(gen_type(rng, depth + 1))
    if roll < 0.6:
        return T.ListOf(gen_type(rng, depth + 1))
    if roll < 0.85:
        labels = rng.sample(_WORDS, rng.randint(1, 4))
        return T.Record(tuple((l, gen_type(rng, depth + 1)) for l in labels))
    labels = rng.sample(_WORDS, rng.randint(1, 3))
    return T.Variant(
        tuple(
            (l, tuple(gen_type(rng, depth + 1) for _ in range(rng.randint(0, 2))))
            for l in labels
        )
    )


def gen_value(rng: random.Random, t: T.TypeExpr, defs=None) -> T.Value:
    t = T.resolve(t, defs or {})
    if isinstance(t, T.Prim):
        if t.name == "bool":
            return T.BoolVal(rng.random() < 0.5)
        if t.name == "int":
            return T.IntVal(rng.randint(-99, 99))
        if t.name == "string":
            return T.StrVal(rng.choice(_WORDS))
        if t.name == "id":
            return T.IdVal(rng.randint(1, 99))
        import datetime

        return T.DateTimeVal(datetime.date(2024, rng.randint(1, 12), rng.randint(1, 28)))
    if isinstance(t, T.Option):
        if rng.random() < 0.4:
            return T.NONE
        return T.SomeVal(gen_value(rng, t.inner, defs))
    if isinstance(t, T.ListOf):
        return T.ListVal(tuple(gen_value(rng, t.inner, defs) for _ in range(rng.randint(0, 3))))
    if isinstance(t, T.Record):
        return T.RecordVal(tuple((l, gen_value(rng, ft, defs)) for l, ft in t.fields))
    if isinstance(t, T.Variant):
        label = rng.choice(t.labels())
        return T.VariantVal(
            label, tuple(gen_value(rng, pt, defs) for pt in t.payload(label))
        )
    raise AssertionError(t)


def gen_type_edit(rng: random.Random, t: T.TypeExpr):
    """A valid edit against `t`, or None when the shape offers nothing."""
    spots = []  # (path, node)

    def walk(node, path):
        if isinstance(node, (T.Record, T.Variant)):
            spots.append((path, node))
        if isinstance(node, (T.Option,)):
            walk(node.inner, path + ("?",))
        elif isinstance(node, T.ListOf):
            walk(node.inner, path + ("[]",))
        elif isinstance(node, T.Record):
            for l, ft in node.fields:
                walk(ft, path + (l,))
        elif isinstance(node, T.Variant):
            for l, payload in node.cases:
                for i, pt in enumerate(payload):
                    walk(pt, path + (f"{l}@{i}",))

    walk(t, ())
    if not spots:
        return None
    path, node = rng.choice(spots)
    fresh = f"z{rng.randint(0, 999)}"
    if isinstance(node, T.Record):
        roll = rng.randrange(4)
        if roll == 0:
            new_t = gen_type(rng, depth=2)
            return T.AddField(path, fresh, new_t, gen_value(rng, new_t))
        if roll == 1 and node.fields:
            return T.RemoveField(path, rng.choice(node.labels()))
        if roll == 2 and node.fields:
            return T.RenameField(path, rng.choice(node.labels()), fresh)
        if node.fields:
            return T.ChangeFieldType(path, rng.choice(node.labels()), gen_type(rng, depth=2))
        return T.AddField(path, fresh, T.INT, T.IntVal(0))
    roll = rng.randrange(4)
    if roll == 0:
        return T.AddCase(path, fresh, tuple(gen_type(rng, 2) for _ in range(rng.randint(0, 2))))
    if roll == 1 and len(node.cases) > 1:
        return T.RemoveCase(path, rng.choice(node.labels()))
    if roll == 2:
        return T.RenameCase(path, rng.choice(node.labels()), fresh)
    return T.ChangeCasePayload(path, rng.choice(node.labels()), (T.INT,))
