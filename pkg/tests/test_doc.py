"""Attributed document trees: edits, selector rewriting, and the merge."""

import random

import pytest

from schemakit.doc import (
    AddColumn,
    BadLog,
    ChangeTag,
    Conflict,
    Elem,
    InsertItem,
    NodeRef,
    PathSel,
    Reorder,
    SelectorMiss,
    SetText,
    SplitText,
    Step,
    Text,
    Wrap,
    apply_edit,
    assign_nids,
    content_equal,
    edit_from_obj,
    edit_to_obj,
    find_by_nid,
    fold,
    get_text,
    merge,
    node_from_obj,
    node_to_obj,
    parse_sel,
    print_sel,
    question_to_obj,
    rewrite_path,
    transport_edit,
    Unrewritable,
)
from tests.conftest import (
    SPEAKERS_MERGED,
    alice_log,
    bob_log,
    gen_doc,
    gen_log,
    speakers_base,
)


# --- tree plumbing --------------------------------------------------------


def test_nids_are_depth_first(speakers=None):
    doc = speakers_base()
    assert doc.nid == "n0"
    assert find_by_nid(doc, "n5").tag == "ul"
    assert find_by_nid(doc, "n7").content.startswith("Adele")


def test_get_text_concatenates():
    doc = speakers_base()
    assert get_text(find_by_nid(doc, "n6")) == "Adele Goldberg, adele@xerox.com"


def test_node_obj_round_trip():
    doc = speakers_base()
    assert node_from_obj(node_to_obj(doc)) == doc
    bare = node_to_obj(doc, with_nids=False)
    assert "nid" not in bare
    assert content_equal(node_from_obj(bare), doc)


def test_selector_parse_print():
    for text in (
        "/ul[id='speakers']/li",
        "/table[id='speakers']/tbody/tr",
        "/body/p[0]",
    ):
        assert print_sel(parse_sel(text)) == text
    sel = parse_sel("/ul[id='speakers']/li")
    assert sel.steps[0] == Step("ul", ("id", "speakers"))
    assert sel.steps[1] == Step("li")
    assert parse_sel("/body/p[0]").steps[1] == Step("p", None, 0)


# --- single edits ---------------------------------------------------------


def test_split_text_derives_stable_part_ids():
    doc = speakers_base()
    res = apply_edit(doc, SplitText(parse_sel("/ul[id='speakers']/li"), ", ", "td", "bob", 1))
    assert res.matched == ("n6", "n8", "n10")
    first = find_by_nid(doc, "n6")
    assert [c.nid for c in first.children] == ["n6.s0", "n6.s1"]
    assert get_text(first.children[0]) == "Adele Goldberg"
    assert first.children[0].children[0].nid == "n6.s0.t"


def test_change_tag_renames_children_too():
    doc = speakers_base()
    apply_edit(doc, SplitText(parse_sel("/ul[id='speakers']/li"), ", ", "td", "bob", 1))
    apply_edit(doc, ChangeTag(parse_sel("/ul[id='speakers']"), "table", {"li": "tr"}, "bob", 2))
    ul = find_by_nid(doc, "n5")
    assert ul.tag == "table"
    assert {c.tag for c in ul.children} == {"tr"}
    # identities survive the retag
    assert ul.children[0].nid == "n6"


def test_wrap_mints_one_wrapper():
    doc = speakers_base()
    apply_edit(doc, SplitText(parse_sel("/ul[id='speakers']/li"), ", ", "td", "bob", 1))
    apply_edit(doc, ChangeTag(parse_sel("/ul[id='speakers']"), "table", {"li": "tr"}, "bob", 2))
    apply_edit(doc, Wrap(parse_sel("/table[id='speakers']/tr"), "tbody", "bob", 3))
    table = find_by_nid(doc, "n5")
    assert len(table.children) == 1
    tbody = table.children[0]
    assert tbody.tag == "tbody" and tbody.nid == "n5.w.bob.3"
    assert [r.nid for r in tbody.children] == ["n6", "n8", "n10"]


def test_add_column_records_cells():
    doc = speakers_base()
    for e in bob_log()[:3]:
        apply_edit(doc, e)
    res = apply_edit(doc, AddColumn(parse_sel("/table[id='speakers']"), "Who", "", "bob", 4))
    assert [(c.row, c.cell) for c in res.cells] == [
        ("n6", "n6.c.Who"),
        ("n8", "n8.c.Who"),
        ("n10", "n10.c.Who"),
    ]
    row = find_by_nid(doc, "n6")
    assert row.children[-1].nid == "n6.c.Who"
    assert get_text(row.children[-1]) == ""


def test_insert_item_stamps_subtree():
    doc = speakers_base()
    apply_edit(
        doc,
        InsertItem(
            parse_sel("/ul[id='speakers']"),
            1,
            Elem("li", {}, [Text("Grace Hopper, grace@navy.mil")]),
            "alice",
            1,
        ),
    )
    ul = find_by_nid(doc, "n5")
    li = ul.children[1]
    assert li.nid == "alice.1.0.0"
    assert li.children[0].nid == "alice.1.0.1"


def test_reorder_sorts_stably_by_text():
    doc = speakers_base()
    apply_edit(doc, Reorder(parse_sel("/ul[id='speakers']"), "text", "alice", 1))
    ul = find_by_nid(doc, "n5")
    assert [c.nid for c in ul.children] == ["n6", "n10", "n8"]


def test_set_text_by_node_ref():
    doc = speakers_base()
    apply_edit(doc, SetText(NodeRef("n6"), "Someone Else", "x", 1))
    node = find_by_nid(doc, "n6")
    assert get_text(node) == "Someone Else"
    assert node.children[0].nid == "n6.t"


def test_selector_miss_raises():
    doc = speakers_base()
    with pytest.raises(SelectorMiss):
        apply_edit(doc, Reorder(parse_sel("/ol[id='nope']"), "text", "a", 1))


def test_fold_collects_miss_notes():
    doc = speakers_base()
    out = fold(doc, [Reorder(parse_sel("/ol[id='nope']"), "text", "a", 1)])
    assert out.notes and out.notes[0].startswith("a/1:")


# --- selector rewriting ---------------------------------------------------


def test_rewrite_path_through_refactoring():
    steps = parse_sel("/ul[id='speakers']/li").steps
    log = bob_log()[:4]
    for e in log:
        steps = rewrite_path(steps, e)
    assert print_sel(PathSel(steps)) == "/table[id='speakers']/tbody/tr"


def test_rewrite_index_under_reorder_is_refused():
    steps = parse_sel("/ul[id='speakers']/li[0]").steps
    with pytest.raises(Unrewritable):
        rewrite_path(steps, Reorder(parse_sel("/ul[id='speakers']"), "text", "a", 1))


# --- transport ------------------------------------------------------------


def test_transport_insert_through_refactoring():
    ins = alice_log()[0]
    for e in bob_log()[:4]:
        ins = transport_edit(ins, e)
    assert isinstance(ins, InsertItem)
    assert print_sel(ins.sel) == "/table[id='speakers']/tbody"
    assert ins.subtree.tag == "tr"
    assert [c.tag for c in ins.subtree.children] == ["td", "td", "td"]
    assert [get_text(c) for c in ins.subtree.children] == [
        "Ada Lovelace", "ada@rsoc.ac.uk", "",
    ]
    assert ins.addcol_cells == [(2, "Who", "")]


def test_transport_set_text_after_split():
    doc = speakers_base()
    split = bob_log()[0]
    res = apply_edit(doc, split)
    edit = SetText(NodeRef("n6"), "Adele G, adele@pARC.org", "alice", 1)
    out = transport_edit(edit, split, s_matched=res.matched)
    # the text no longer lives in one node: the transported form re-splits
    assert type(out).__name__ == "_Resplit"
    doc2 = speakers_base()
    apply_edit(doc2, bob_log()[0])
    apply_edit(doc2, out)
    row = find_by_nid(doc2, "n6")
    assert [get_text(c) for c in row.children] == ["Adele G", "adele@pARC.org"]


# --- merge ----------------------------------------------------------------


def test_merge_speakers_exact():
    out = merge(speakers_base(), alice_log(), bob_log())
    assert node_to_obj(out.doc) == SPEAKERS_MERGED
    assert out.conflicts == ()
    assert out.notes == ()
    assert len(out.questions) == 1
    q = out.questions[0]
    assert (q.cell, q.row, q.header) == ("alice.1.0.5", "alice.1.0.0", "Who")
    assert q.context == "Ada Lovelace, ada@rsoc.ac.uk"
    assert question_to_obj(q) == {
        "cell": "alice.1.0.5",
        "row": "alice.1.0.0",
        "header": "Who",
        "context": "Ada Lovelace, ada@rsoc.ac.uk",
    }


def test_merge_is_symmetric_on_the_speakers_case():
    a = merge(speakers_base(), alice_log(), bob_log())
    b = merge(speakers_base(), bob_log(), alice_log())
    assert node_to_obj(a.doc) == node_to_obj(b.doc)
    assert a.questions == b.questions
    assert a.conflicts == b.conflicts


def test_merge_filled_cells_ask_no_question():
    # bob assigned owners to every original row, so only Ada's cell asks
    out = merge(speakers_base(), alice_log(), bob_log())
    cells = [q.cell for q in out.questions]
    assert "n6.c.Who" not in cells and "n8.c.Who" not in cells


def test_merge_rejects_bad_logs():
    doc = speakers_base()
    with pytest.raises(BadLog):
        merge(doc, [Reorder(parse_sel("/ul[id='speakers']"), "text", "", 1)], [])
    with pytest.raises(BadLog):
        merge(
            doc,
            [
                Reorder(parse_sel("/ul[id='speakers']"), "text", "a", 2),
                SetText(NodeRef("n7"), "x", "a", 1),
            ],
            [],
        )
    with pytest.raises(BadLog):
        merge(
            doc,
            [Reorder(parse_sel("/ul[id='speakers']"), "text", "a", 1)],
            [SetText(NodeRef("n7"), "x", "a", 1)],
        )


def test_merge_conflicting_schema_edits_are_reported():
    doc = speakers_base()
    ours = [ChangeTag(parse_sel("/ul[id='speakers']"), "table", {"li": "tr"}, "a", 1)]
    theirs = [ChangeTag(parse_sel("/ul[id='speakers']"), "ol", {}, "b", 1)]
    out = merge(doc, ours, theirs)
    assert out.conflicts == (
        Conflict("ChangeTag", ("a", 1), ("b", 1), ("n5",)),
    )
    # neither side wins without a priority: the list stays a list
    assert find_by_nid(out.doc, "n5").tag == "ul"
    swapped = merge(speakers_base(), theirs, ours)
    assert swapped.conflicts == out.conflicts
    assert node_to_obj(out.doc) == node_to_obj(swapped.doc)


def test_merge_conflict_yields_to_author_priority():
    doc = speakers_base()
    ours = [ChangeTag(parse_sel("/ul[id='speakers']"), "table", {"li": "tr"}, "a", 1)]
    theirs = [ChangeTag(parse_sel("/ul[id='speakers']"), "ol", {}, "b", 1)]
    out = merge(doc, ours, theirs, author_priority="b")
    assert find_by_nid(out.doc, "n5").tag == "ol"
    assert out.conflicts  # still reported, just resolved


def test_merge_duplicate_edits_collapse():
    doc = speakers_base()
    out = merge(
        doc,
        [ChangeTag(parse_sel("/ul[id='speakers']"), "table", {"li": "tr"}, "a", 1)],
        [ChangeTag(parse_sel("/ul[id='speakers']"), "table", {"li": "tr"}, "b", 1)],
    )
    assert find_by_nid(out.doc, "n5").tag == "table"
    assert out.conflicts == ()
    assert any("duplicate" in n for n in out.notes)


def test_merge_commutes_seeded():
    rng = random.Random(60601)
    ran = 0
    for _ in range(60):
        doc = gen_doc(rng)
        ours = gen_log(rng, doc, "a")
        theirs = gen_log(rng, doc, "b")
        one = merge(doc, ours, theirs)
        other = merge(doc, theirs, ours)
        assert node_to_obj(one.doc) == node_to_obj(other.doc)
        assert one.conflicts == other.conflicts
        assert one.questions == other.questions
        assert sorted(one.notes) == sorted(other.notes)
        ran += 1
    assert ran == 60


# --- edit serialization ---------------------------------------------------


def test_edit_obj_round_trips():
    for e in alice_log() + bob_log():
        assert edit_from_obj(edit_to_obj(e)) == e
