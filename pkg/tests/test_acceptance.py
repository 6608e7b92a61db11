"""End-to-end gate: the worked examples byte-for-byte, then property sweeps.

Each test stands alone and prints its verdict through pytest's own
pass/fail line. The seeded sweeps state their case counts up front; the
three long ones also assert their time budget.
"""

import random
import time

import pytest

from schemakit import types as T
from schemakit.database import Column, Database, Table, db_to_obj
from schemakit.doc import (
    Elem,
    NodeRef,
    Question,
    SetText,
    Text,
    apply_edit,
    assign_nids,
    find_by_nid,
    get_text,
    merge,
    node_to_obj,
)
from schemakit.entity import extract_entity, absorb_entity
from schemakit.formula import (
    Add,
    Count,
    Mul,
    Num,
    PathRef,
    evaluate,
    find_formulas,
    parse_formula,
    print_formula,
    rewrite_formula,
)
from schemakit.lens import (
    WRITE_POLICIES,
    InsertRowEdit,
    MultiplicityLens,
    SetCellEdit,
    apply_db_edit,
    lens_for,
    transport_edit,
)
from schemakit.machine import (
    Assign,
    InvalidPatch,
    PAddState,
    PAddTransition,
    PAddVar,
    PChangeTransitionEvent,
    PChangeVarType,
    PRemoveState,
    PRemoveTransition,
    PRemoveVar,
    PRenameState,
    PRenameVar,
    PSetEntry,
    PSetInit,
    Patch,
    Rejected,
    StateDef,
    VarDecl,
    enqueue,
    machines_equiv,
    parse_machine,
    patch,
    print_machine,
    start,
    step,
)
from schemakit.migrate import (
    ValueMapping,
    derive_migration,
    migrate_value,
    reconcile_handlers,
)
from schemakit.query import evaluate_query, parse_query, print_query, rewrite_query, tokens_of
from schemakit.types import canonical_dumps

from tests.conftest import (
    DOORS_SRC,
    PENDING_FLAT_SQL,
    PENDING_JOIN_SQL,
    SPEAKERS_MERGED,
    alice_log,
    bob_log,
    gen_doc,
    gen_events,
    gen_flat_case,
    gen_log,
    gen_machine,
    gen_query,
    gen_type,
    gen_type_edit,
    orders_flat,
    orders_spec,
    speakers_base,
    todo_defs,
    todo_state,
    todo_state_type,
    todo_events,
)


# --- 1. the customer extraction, cell for cell ---------------------------


def test_01_customer_extraction_matches_the_worked_database():
    db, corr = extract_entity(orders_flat(), orders_spec())
    expected = Database(
        (
            (
                "Orders",
                Table(
                    "oid",
                    (
                        Column("oid", "id"),
                        Column("item", "string"),
                        Column("quantity", "int"),
                        Column("ship_date", "datetime?"),
                        Column("cid", "id", ref="Customers"),
                    ),
                    (
                        (1, "Anvil", 1, "2023-02-03", 1),
                        (2, "Dynamite", 2, None, 2),
                        (3, "Bird Seed", 1, None, 1),
                    ),
                ),
            ),
            (
                "Customers",
                Table(
                    "cid",
                    (
                        Column("cid", "id"),
                        Column("customer_name", "string"),
                        Column("customer_address", "string"),
                    ),
                    (
                        (1, "Wile E Coyote", "123 Desert Station"),
                        (2, "Daffy Duck", "White Rock Lake"),
                    ),
                ),
            ),
        )
    )
    assert canonical_dumps(db_to_obj(db)) == canonical_dumps(db_to_obj(expected))
    fk = db.table("Orders").col_index("cid")
    assert [r[fk] for r in db.table("Orders").rows] == [1, 2, 1]
    assert corr.key_for(("Wile E Coyote", "123 Desert Station")) == 1


# --- 2. one query, same two rows on both schemas -------------------------


def test_02_pending_orders_query_survives_extraction():
    flat = orders_flat()
    extracted, corr = extract_entity(flat, orders_spec())
    q = parse_query(PENDING_FLAT_SQL)
    rewritten = rewrite_query(q, corr)
    assert tokens_of(print_query(rewritten)) == tokens_of(PENDING_JOIN_SQL)

    before = evaluate_query(flat, q)
    after = evaluate_query(extracted, rewritten)
    assert len(before.rows) == 2 and len(after.rows) == 2
    assert before.equivalent(after)
    items = sorted(r[before.columns.index("item")] for r in before.rows)
    assert items == ["Bird Seed", "Dynamite"]


# --- 3. 1,000 generated databases agree before and after -----------------


def test_03_rewritten_queries_agree_on_a_thousand_databases():
    rng = random.Random(93101)
    t0 = time.monotonic()
    for _ in range(1000):
        db, spec = gen_flat_case(rng)
        q = gen_query(rng, db, "T")
        extracted, corr = extract_entity(db, spec)
        rq = rewrite_query(q, corr)
        assert evaluate_query(db, q).equivalent(evaluate_query(extracted, rq))
    assert time.monotonic() - t0 < 30.0


# --- 4. the two divergent page logs, merged ------------------------------


def test_04_divergent_page_edits_merge_to_the_agreed_table():
    res = merge(speakers_base(), alice_log(), bob_log())
    assert canonical_dumps(node_to_obj(res.doc)) == canonical_dumps(SPEAKERS_MERGED)
    assert res.conflicts == ()
    assert res.questions == (
        Question("alice.1.0.5", "alice.1.0.0", "Who", "Ada Lovelace, ada@rsoc.ac.uk"),
    )

    # the table reads Ada/Adele/Betty/Margaret with Who blank/TP/JE/JE
    tbody = find_by_nid(res.doc, "n5.w.bob.3")
    listing = []
    for tr in tbody.children:
        name = get_text(tr.children[0])
        who = get_text(tr.children[2])
        listing.append((name.split(" ")[0], who))
    assert listing == [("Ada", ""), ("Adele", "TP"), ("Betty", "JE"), ("Margaret", "JE")]

    swapped = merge(speakers_base(), bob_log(), alice_log())
    assert node_to_obj(swapped.doc) == node_to_obj(res.doc)
    assert swapped.conflicts == res.conflicts
    assert swapped.questions == res.questions
    assert sorted(swapped.notes) == sorted(res.notes)


# --- 5. the budget formulas follow the page refactoring ------------------


def budget_speakers_base() -> Elem:
    def li(text):
        return Elem("li", {}, [Text(text)])

    def pair(term, value):
        return [Elem("dt", {}, [Text(term)]), Elem("dd", {}, [Text(value)])]

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
                    li("Adele Goldberg, adele@xerox.com"),
                    li("Margaret Hamilton, hamilton@mit.com"),
                    li("Betty Jean Jennings, betty@rand.com"),
                ],
            ),
            Elem(
                "dl",
                {},
                pair("Venue", "$1200")
                + pair("Speakers", "=COUNT(/ul[id='speakers']/li)")
                + pair("Total", "=/dl/dd[0] * /dl/dd[1]"),
            ),
        ],
    )
    assign_nids(doc)
    return doc


def test_05_formulas_follow_the_page_refactoring():
    count = parse_formula("=COUNT(/ul[id='speakers']/li)")
    for e in bob_log()[:3]:  # split, retag, wrap: the structural moves
        count = rewrite_formula(count, e)
    assert print_formula(count) == "COUNT(/table[id='speakers']/tbody/tr)"

    merged = merge(budget_speakers_base(), alice_log(), bob_log()).doc
    hosts = dict(find_formulas(merged))
    count_host = next(nid for nid, text in hosts.items() if "COUNT" in text)
    apply_edit(merged, SetText(NodeRef(count_host), "=" + print_formula(count), "fix", 1))

    assert evaluate(merged, count) == 4
    assert evaluate(merged, parse_formula("=/dl/dd[0] * /dl/dd[1]")) == 4800


# --- 6. 500 merges, argument order irrelevant ----------------------------


def test_06_merge_ignores_argument_order():
    rng = random.Random(64201)
    t0 = time.monotonic()
    for _ in range(500):
        base = gen_doc(rng)
        ours = gen_log(rng, base, "a")
        theirs = gen_log(rng, base, "b")
        ab = merge(base, ours, theirs)
        ba = merge(base, theirs, ours)
        assert node_to_obj(ab.doc) == node_to_obj(ba.doc)
        assert ab.conflicts == ba.conflicts
        assert ab.questions == ba.questions
        assert sorted(ab.notes) == sorted(ba.notes)
    assert time.monotonic() - t0 < 30.0


# --- 7. the scalar-to-list write matrix ----------------------------------


def test_07_scalar_writes_follow_the_chosen_policy():
    ml = MultiplicityLens("assignee", "assignees")
    write = {"assignee": "C"}
    current = {"assignees": ["A", "B"]}
    assert ml.putback(write, current, "only-new") == {"assignees": ["C"]}
    assert ml.putback(write, current, "replace-head") == {"assignees": ["C", "B"]}
    assert ml.putback(write, current, "prepend") == {"assignees": ["C", "A", "B"]}

    assert ml.fwd({"assignee": None}) == {"assignees": []}
    assert ml.fwd({"assignee": "A"}) == {"assignees": ["A"]}
    back = ml.bwd({"assignees": []})
    assert back.value == {"assignee": None} and back.report.clean
    back = ml.bwd({"assignees": ["A"]})
    assert back.value == {"assignee": "A"} and back.report.clean


# --- 8. 1,000 putback cases + 1,000 read round trips ---------------------


def test_08_lens_laws_hold_under_generation():
    ml = MultiplicityLens("assignee", "assignees")
    names = ("Ada", "Grace", "Betty", "Jean", "Kay")
    rng = random.Random(87301)

    for i in range(1000):
        current = {
            "id": i,
            "assignees": [rng.choice(names) for _ in range(rng.randint(0, 4))],
            "note": rng.choice(names).lower(),
        }
        head = None if rng.random() < 0.25 else rng.choice(names)
        write = {"id": i, "assignee": head, "note": rng.choice(names).lower()}
        policy = rng.choice(WRITE_POLICIES)

        put = ml.putback(write, current, policy)
        assert ml.bwd(put).value == write  # what was written reads back

        got = ml.bwd(current).value
        assert ml.putback(got, current, policy) == current  # no-op write

    for i in range(1000):
        rec = {
            "id": i,
            "assignee": None if rng.random() < 0.3 else rng.choice(names),
            "note": rng.choice(names).lower(),
        }
        back = ml.bwd(ml.fwd(rec))
        assert back.value == rec and back.report.clean


# --- 9. the stored todo list crosses its type change ---------------------


def test_09_stored_todos_survive_the_completion_date_change():
    edit = T.ChangeFieldType(("items", "[]"), "completed", T.Option(T.DATETIME))
    mapping = ValueMapping(
        cases=(
            (T.BoolVal(False), T.NONE),
            (T.BoolVal(True), T.SomeVal(T.DateTimeVal.parse("2024-05-01"))),
        )
    )
    defs = todo_defs()
    plan = derive_migration(todo_state_type(), edit, mapping, defs)
    migrated = migrate_value(plan, todo_state())

    first, second = migrated.get("items").items
    assert first.get("completed") == T.SomeVal(T.DateTimeVal.parse("2024-05-01"))
    assert second.get("completed") == T.NONE
    assert first.get("title") == T.StrVal("Check Twitter")
    assert second.get("title") == T.StrVal("Write the paper")
    assert first.get("id") == T.IdVal(1) and second.get("id") == T.IdVal(2)

    new_defs = dict(defs)
    new_defs["Item"] = T.apply_type_edit(
        defs["Item"], T.ChangeFieldType((), "completed", T.Option(T.DATETIME))
    )
    assert T.conforms(migrated, todo_state_type(), new_defs).ok

    # the handler table answers each event-type edit with the right todo
    handlers = {"SetTitle": "h1", "SetCompleted": "h2", "Remove": "h3", "Add": "h4"}
    ev = todo_events()

    changed = T.apply_type_edit(
        ev, T.ChangeCasePayload((), "SetCompleted", (T.ID, T.Option(T.DATETIME)))
    )
    table, todos = reconcile_handlers(handlers, ev, changed)
    assert [(t.kind, t.case) for t in todos] == [("signature-changed", "SetCompleted")]
    assert table == handlers

    added = T.apply_type_edit(ev, T.AddCase((), "SetDue", (T.ID, T.DATETIME)))
    table, todos = reconcile_handlers(handlers, ev, added)
    assert [(t.kind, t.case) for t in todos] == [("missing-handler", "SetDue")]
    assert table == handlers

    removed = T.apply_type_edit(ev, T.RemoveCase((), "Remove"))
    table, todos = reconcile_handlers(handlers, ev, removed)
    assert [(t.kind, t.case) for t in todos] == [("unused-handler", "Remove")]
    assert "Remove" not in table and set(table) == {"SetTitle", "SetCompleted", "Add"}


# --- 10. a running machine absorbs each kind of program change -----------


def doors():
    m = parse_machine(DOORS_SRC)
    return m, start(m)


def test_10_running_machines_absorb_each_change_kind():
    # add state / rename state: structure only, references follow
    m, rt = doors()
    step(m, rt, "open")
    m, rt, _ = patch(m, rt, Patch((PAddState(StateDef("locked", (), ())),)))
    assert m.state("locked") is not None
    assert rt.current == "opened" and rt.vars == {"isClosed": False}
    m, rt, _ = patch(m, rt, Patch((PRenameState("opened", "ajar"),)))
    assert rt.current == "ajar"
    assert rt.visited == {"closed": 1, "ajar": 1}
    assert m.state("closed").transitions[0].target == "ajar"

    # remove the current state: reject, gotoInitial, explicit
    removal = (PRemoveState("closed"), PSetInit("opened"))
    m, rt = doors()
    with pytest.raises(Rejected):
        patch(m, rt, Patch(removal, on_current="reject"))
    assert rt.current == "closed" and rt.visited == {"closed": 1}

    m, rt = doors()
    m2, rt2, notes = patch(m, rt, Patch(removal, on_current="gotoInitial"))
    assert rt2.current == "opened"
    assert rt2.vars == {"isClosed": True}  # repositioned, entry NOT run
    assert rt2.visited == {}  # the removed state's count goes; no new visit
    assert any("targeting 'closed'" in n for n in notes)

    m, rt = doors()
    m2, rt2, _ = patch(m, rt, Patch(removal, on_current=("explicit", "opened")))
    assert rt2.current == "opened"
    m, rt = doors()
    with pytest.raises(InvalidPatch):
        patch(m, rt, Patch(removal, on_current=("explicit", "nowhere")))

    # add variable: appears initialized, nothing else moves
    m, rt = doors()
    m, rt, _ = patch(m, rt, Patch((PAddVar(VarDecl("count", "int", 0)),)))
    assert rt.vars == {"isClosed": True, "count": 0}
    assert rt.current == "closed"

    # remove variable: gone from the map, statements stripped
    m, rt = doors()
    m, rt, notes = patch(m, rt, Patch((PRemoveVar("isClosed"),)))
    assert rt.vars == {}
    assert any("isClosed" in n for n in notes)
    step(m, rt, "open")  # the stripped machine still runs
    assert rt.current == "opened"

    # rename variable: value preserved, entries rewritten
    m, rt = doors()
    step(m, rt, "open")
    m, rt, _ = patch(m, rt, Patch((PRenameVar("isClosed", "doorShut"),)))
    assert rt.vars == {"doorShut": False}
    step(m, rt, "close")
    assert rt.vars == {"doorShut": True}

    # change variable type: the running value is converted
    m, rt = doors()
    retype = Patch(
        (
            PChangeVarType("isClosed", "int"),
            PSetEntry("closed", (Assign("isClosed", 1),)),
            PSetEntry("opened", (Assign("isClosed", 0),)),
        )
    )
    m, rt, notes = patch(m, rt, retype)
    assert rt.vars == {"isClosed": 1} and notes == ()
    step(m, rt, "open")
    assert rt.vars == {"isClosed": 0}

    # add transition: immediately live
    m, rt = doors()
    m, rt, _ = patch(m, rt, Patch((PAddTransition("closed", "knock", "closed"),)))
    res = step(m, rt, "knock")
    assert res.fired and rt.current == "closed" and rt.visited == {"closed": 2}

    # remove transition with a pending event: drop empties the queue, reject refuses
    m, rt = doors()
    enqueue(rt, "open")
    m2, rt2, notes = patch(
        m, rt, Patch((PRemoveTransition("closed", "open"),), on_pending="drop")
    )
    assert list(rt2.pending) == []
    assert any("dropped stale pending event(s): open" in n for n in notes)
    m, rt = doors()
    enqueue(rt, "open")
    with pytest.raises(Rejected):
        patch(m, rt, Patch((PRemoveTransition("closed", "open"),), on_pending="reject"))
    assert list(rt.pending) == ["open"]

    # change a transition's event: old spelling is stale, new one fires
    m, rt = doors()
    enqueue(rt, "open")
    m, rt, notes = patch(
        m, rt, Patch((PChangeTransitionEvent("closed", "open", "pull"),), on_pending="drop")
    )
    assert list(rt.pending) == []
    assert any("open" in n for n in notes)
    res = step(m, rt, "pull")
    assert res.fired and rt.current == "opened"

    # swap entry statements: no retroactive execution
    m, rt = doors()
    m, rt, _ = patch(m, rt, Patch((PSetEntry("closed", (Assign("isClosed", False),)),)))
    assert rt.vars == {"isClosed": True}  # unchanged until the state is re-entered
    step(m, rt, "open")
    step(m, rt, "close")
    assert rt.vars == {"isClosed": False}

    # rename neutrality over 200 generated sessions: patching mid-run equals
    # running the renamed machine from scratch
    rng = random.Random(77002)
    for _ in range(200):
        m = gen_machine(rng)
        events = gen_events(rng)
        cut = rng.randint(0, len(events))
        victim = rng.choice(m.vars).name
        rename = Patch((PRenameVar(victim, "renamed"),))

        ma, rta = m, start(m)
        for ev in events[:cut]:
            step(ma, rta, ev)
        ma, rta, _ = patch(ma, rta, rename)
        for ev in events[cut:]:
            step(ma, rta, ev)

        mb, _, _ = patch(m, start(m), rename)
        rtb = start(mb)
        for ev in events:
            step(mb, rtb, ev)

        assert rta.current == rtb.current
        assert rta.vars == rtb.vars
        assert rta.visited == rtb.visited


# --- 11. 500-case round trips in every direction -------------------------


def _row_maps(db, table):
    t = db.table(table)
    names = [c.name for c in t.columns]
    return {r[t.key_index]: dict(zip(names, r)) for r in t.rows}


def gen_formula(rng, depth=0):
    def sel_steps():
        from schemakit.doc import Step

        steps = []
        for _ in range(rng.randint(1, 3)):
            tag = rng.choice(("div", "ul", "li", "tr", "td", "dd", "span"))
            roll = rng.random()
            if roll < 0.3:
                steps.append(Step(tag, (rng.choice(("id", "class")), rng.choice(("a", "b2")))))
            elif roll < 0.55:
                steps.append(Step(tag, None, rng.randint(0, 5)))
            else:
                steps.append(Step(tag))
        return tuple(steps)

    def leaf():
        roll = rng.random()
        if roll < 0.45:
            return Num(rng.randint(0, 999) if rng.random() < 0.8 else rng.randint(0, 99) + 0.5)
        if roll < 0.75:
            return PathRef(sel_steps())
        return Count(sel_steps())

    # left-leaning chains only: what the grammar's associativity reproduces
    f = leaf()
    for _ in range(rng.randint(0, 3)):
        op = Add if rng.random() < 0.5 else Mul
        right = leaf()
        if op is Mul and rng.random() < 0.3:
            right = Add(leaf(), leaf())
        f = op(f, right)
    return f


def test_11_round_trips_hold_across_the_languages():
    rng = random.Random(11501)
    for _ in range(500):  # un-extract restores every cell
        db, spec = gen_flat_case(rng)
        extracted, _ = extract_entity(db, spec)
        restored = absorb_entity(extracted, "E", "ef")
        assert _row_maps(restored, "T") == _row_maps(db, "T")
        assert restored.table("T").keys() == db.table("T").keys()

    rng = random.Random(11502)
    done = 0
    while done < 500:  # a diff of two types replays onto the first
        old = gen_type(rng)
        e = gen_type_edit(rng, old)
        if e is None:
            continue
        try:
            new = T.apply_type_edit(old, e)
        except (T.InvalidEdit, T.DuplicateLabel):
            continue
        replayed = old
        for stp in T.type_diff(old, new).edits:
            replayed = T.apply_type_edit(replayed, stp)
        assert replayed == new
        done += 1

    rng = random.Random(11503)
    for _ in range(500):  # query text
        db, _ = gen_flat_case(rng)
        q = gen_query(rng, db, "T")
        assert parse_query(print_query(q)) == q

    rng = random.Random(11504)
    for _ in range(500):  # machine text
        m = gen_machine(rng)
        again = parse_machine(print_machine(m))
        assert again == m and machines_equiv(again, m)

    rng = random.Random(11505)
    for _ in range(500):  # formula text
        f = gen_formula(rng)
        text = print_formula(f)
        assert parse_formula(text) == f
        assert print_formula(parse_formula(text)) == text


# --- 12. edits cross the extraction lens with every loss reported --------


def test_12_edits_cross_the_extraction_without_silent_loss():
    flat = orders_flat()
    extracted, corr = extract_entity(flat, orders_spec())
    ln = lens_for(corr)

    # a new-schema insert lands as the right flat row
    insert = InsertRowEdit(
        "Orders",
        (("oid", 4), ("item", "Rocket"), ("quantity", 1), ("ship_date", None), ("cid", 2)),
    )
    edits, report = transport_edit(insert, ln, "bwd", db=extracted)
    assert report.clean and len(edits) == 1
    assert edits[0].table == "Orders"
    assert dict(edits[0].cells) == {
        "oid": 4,
        "item": "Rocket",
        "quantity": 1,
        "ship_date": None,
        "customer_name": "Daffy Duck",
        "customer_address": "White Rock Lake",
    }

    # a flat address fix updates exactly one entity row
    fix = SetCellEdit("Orders", 2, "customer_address", "Duck Pond")
    edits, report = transport_edit(fix, ln, "fwd", db=flat, target_db=extracted)
    assert report.clean
    assert edits == (SetCellEdit("Customers", 2, "customer_address", "Duck Pond"),)

    # 500 generated backward transports: either the states agree afterwards,
    # or the loss shows up in a report / refusal — never silently
    rng = random.Random(12765)
    words = ("red", "blue", "lime", "teal", "plum")
    checked = reported = 0
    for _ in range(500):
        db, spec = gen_flat_case(rng)
        ex, c = extract_entity(db, spec)
        lens = lens_for(c)
        source, ent = ex.table("T"), ex.table("E")
        keys, ekeys = source.keys(), ent.keys()
        plain = [col for col in source.columns if col.name not in ("k", "ef")]

        def cell(col):
            if col.optional and rng.random() < 0.3:
                return None
            if col.base_type == "int":
                return rng.randint(-9, 30)
            if col.base_type == "bool":
                return rng.random() < 0.5
            return rng.choice(words)

        kind = rng.randrange(5)
        if kind == 0:
            edit = SetCellEdit("E", rng.choice(ekeys), rng.choice(spec.columns), rng.choice(words))
        elif kind == 1:
            col = rng.choice(plain)
            edit = SetCellEdit("T", rng.choice(keys), col.name, cell(col))
        elif kind == 2:
            edit = SetCellEdit("T", rng.choice(keys), "ef", rng.choice(ekeys))
        elif kind == 3:
            cells = [("k", source.next_key()), ("ef", rng.choice(ekeys))]
            cells += [(col.name, cell(col)) for col in plain]
            edit = InsertRowEdit("T", tuple(cells))
        else:
            cells = [("ek", ent.next_key())]
            cells += [(name, rng.choice(words)) for name in spec.columns]
            edit = InsertRowEdit("E", tuple(cells))

        moved, report = transport_edit(edit, lens, "bwd", db=ex)
        after_ex = apply_db_edit(ex, edit)
        after_flat = db
        for te in moved:
            after_flat = apply_db_edit(after_flat, te)
        back = lens.bwd(after_ex)
        if report.clean and back.report.clean:
            checked += 1
            assert db_to_obj(back.value) == db_to_obj(after_flat)
        else:
            reported += 1
    assert checked >= 300  # the agreement oracle did real work
    assert checked + reported == 500
