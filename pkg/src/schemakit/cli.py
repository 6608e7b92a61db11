"""Command-line surface: one executable, a verb group per module.

    schemakit type diff|apply
    schemakit migrate
    schemakit db extract|absorb|merge|split
    schemakit query rewrite|eval
    schemakit doc apply|merge|eval
    schemakit lens fwd|bwd|put|transport
    schemakit sm run MACHINE SESSION
    schemakit live run SCRIPT

Contract. Primary output (JSON, SQL text, CSV, or a JSON-lines trace) goes
to stdout or --out; everything diagnostic -- drop reports, merge conflicts,
pending questions, notes -- goes to stderr as JSON lines, one object per
line. Exit 0 on success, 1 when an operation raises a domain error (the
last stderr line explains it), 2 for usage errors. Batch runs are pure
functions of (argv, input files): two runs produce identical bytes.

Interactive mode (SCHEMAKIT_MODE=interactive, or --interactive anywhere on
the command line) turns the three errors that mean "a human must decide"
into one-line stdin prompts: a migration default, a split reassignment, a
write policy. Every prompt answer can also be supplied as a flag or file,
so the full surface runs headless.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

from . import database, doc, entity, formula, lens, machine, migrate, query, types
from .errors import NotInteractive, SchemakitError


class _Usage(Exception):
    """Bad argv combination that argparse alone cannot express."""


class ScriptError(SchemakitError):
    """A session/script record that cannot be interpreted."""

    code = "bad-script"


# ---------------------------------------------------------------------------
# small I/O helpers


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as f:
        return f.read()


def _read_json(path: str):
    return json.loads(_read_text(path))


def _read_jsonl(path: str) -> list:
    out = []
    for line in _read_text(path).splitlines():
        line = line.strip()
        if line:
            out.append(json.loads(line))
    return out


def _write_out(text: str, args) -> None:
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _write_json_file(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(types.canonical_dumps(obj) + "\n")


def _emit_json(obj, args) -> None:
    _write_out(types.canonical_dumps(obj) + "\n", args)


def _diag(obj) -> None:
    sys.stderr.write(types.canonical_dumps(obj) + "\n")


def _interactive(args) -> bool:
    if getattr(args, "interactive", False):
        return True
    return os.environ.get("SCHEMAKIT_MODE", "batch") == "interactive"


def _ask(prompt: str) -> str:
    """One-line stdin prompt. The question goes to stderr so primary
    output stays clean and replayable."""
    sys.stderr.write(prompt)
    sys.stderr.flush()
    line = sys.stdin.readline()
    if not line:
        raise NotInteractive("stdin closed while a question was pending")
    return line.strip()


def _parse_key(raw: str):
    return int(raw) if raw.lstrip("-").isdigit() else raw


def _load_defs(args) -> dict:
    if getattr(args, "defs", None):
        defs = {k: types.type_from_obj(v) for k, v in _read_json(args.defs).items()}
        types.check_defs(defs)
        return defs
    return {}


# ---------------------------------------------------------------------------
# type verbs


def _cmd_type_diff(args):
    old = types.type_from_obj(_read_json(args.old))
    new = types.type_from_obj(_read_json(args.new))
    directives = []
    if args.renames:
        for r in _read_json(args.renames):
            directives.append(
                types.RenameDirective(
                    tuple(r.get("path", ())),
                    r["old"],
                    r["new"],
                    r.get("scope", "field"),
                )
            )
    res = types.type_diff(old, new, directives)
    _emit_json(
        {
            "edits": [types.edit_to_obj(e) for e in res.edits],
            "flags": [
                {"kind": f.kind, "path": list(f.path), "detail": list(f.detail)}
                for f in res.flags
            ],
        },
        args,
    )


def _cmd_type_apply(args):
    t = types.type_from_obj(_read_json(args.type))
    defs = _load_defs(args)
    raw = _read_json(args.edit)
    for obj in raw if isinstance(raw, list) else [raw]:
        t = types.apply_type_edit(t, types.edit_from_obj(obj), defs)
    _emit_json(types.type_to_obj(t), args)


# ---------------------------------------------------------------------------
# migrate


def _parse_hint(obj):
    """A hint file/record is a value mapping ({"builtin"| "cases"}) or a
    default value ({"default": <value>})."""
    if obj is None:
        return None
    if "default" in obj:
        return types.value_from_obj(obj["default"])
    return migrate.mapping_from_obj(obj)


def _derive(old_t, edit, hint, defs, args):
    try:
        return migrate.derive_migration(old_t, edit, hint, defs)
    except migrate.NeedsInput as need:
        if not _interactive(args):
            raise
        _diag(need.to_json_obj())
        answer = _ask('hint as JSON ({"default":..} | {"builtin":..} | {"cases":..}): ')
        return migrate.derive_migration(old_t, edit, _parse_hint(json.loads(answer)), defs)


def _cmd_migrate(args):
    if args.plan and (args.type or args.edit or args.hints):
        raise _Usage("--plan replaces --type/--edit/--hints; pass one or the other")
    if not args.plan and not (args.type and args.edit):
        raise _Usage("migrate needs either --plan, or --type together with --edit")
    defs = _load_defs(args)

    if args.plan:
        raw = _read_json(args.plan)
        plans = [migrate.plan_from_obj(p) for p in (raw if isinstance(raw, list) else [raw])]
    else:
        cur = types.type_from_obj(_read_json(args.type))
        raw = _read_json(args.edit)
        eobjs = raw if isinstance(raw, list) else [raw]
        hints_raw = _read_json(args.hints) if args.hints else None
        if isinstance(hints_raw, list):
            hint_list = [_parse_hint(h) for h in hints_raw]
        else:
            hint_list = [_parse_hint(hints_raw)] * len(eobjs)
        hint_list += [None] * (len(eobjs) - len(hint_list))
        plans = []
        for eobj, hint in zip(eobjs, hint_list):
            e = types.edit_from_obj(eobj)
            plans.append(_derive(cur, e, hint, defs, args))
            cur = types.apply_type_edit(cur, e, defs)

    plan_payload = [migrate.plan_to_obj(p) for p in plans]
    if len(plan_payload) == 1:
        plan_payload = plan_payload[0]
    if args.emit_plan:
        _write_json_file(args.emit_plan, plan_payload)

    if args.state:
        state = types.value_from_obj(_read_json(args.state))
        for p in plans:
            state = migrate.migrate_value(p, state)
        _emit_json(types.value_to_obj(state), args)
    elif not args.emit_plan:
        _emit_json(plan_payload, args)  # the plan is the only thing asked for


# ---------------------------------------------------------------------------
# db verbs


def _cmd_db_extract(args):
    db = database.db_from_obj(_read_json(args.db))
    source = args.table
    if source is None:
        names = db.names()
        if len(names) != 1:
            raise _Usage("--table is required when the database holds several tables")
        source = names[0]
    spec = entity.ExtractSpec(
        source, tuple(args.cols.split(",")), args.new, args.key, args.fk
    )
    out, corr = entity.extract_entity(db, spec)
    if args.corr:
        _write_json_file(args.corr, entity.corr_to_obj(corr))
    else:
        _diag({"correspondence": entity.corr_to_obj(corr)})
    _emit_json(database.db_to_obj(out), args)


def _cmd_db_absorb(args):
    db = database.db_from_obj(_read_json(args.db))
    _emit_json(database.db_to_obj(entity.absorb_entity(db, args.table, args.fk)), args)


def _cmd_db_merge(args):
    db = database.db_from_obj(_read_json(args.db))
    keys = [_parse_key(k) for k in args.keys.split(",")]
    resolution = _read_json(args.resolution) if args.resolution else None
    _emit_json(
        database.db_to_obj(entity.merge_entities(db, args.table, keys, resolution)),
        args,
    )


def _cmd_db_split(args):
    db = database.db_from_obj(_read_json(args.db))
    key = _parse_key(args.key)
    reassignment = None
    if args.reassignment:
        reassignment = {}
        for where, choice in _read_json(args.reassignment):
            reassignment[(where[0], where[1])] = choice
    try:
        out = entity.split_entity(db, args.table, key, reassignment)
    except NotInteractive as err:
        if reassignment is not None or not _interactive(args):
            raise
        _diag(err.to_json_obj())
        reassignment = {}
        for tname, rkey, col in entity.referencing_rows(db, args.table, key):
            ans = _ask(f"{tname}[{rkey}].{col} follows old or new? ")
            reassignment[(tname, rkey)] = ans
        out = entity.split_entity(db, args.table, key, reassignment)
    _emit_json(database.db_to_obj(out), args)


# ---------------------------------------------------------------------------
# query verbs


def _cmd_query_rewrite(args):
    q = query.parse_query(_read_text(args.query))
    corr = entity.corr_from_obj(_read_json(args.correspondence))
    _write_out(query.print_query(query.rewrite_query(q, corr)) + "\n", args)


def _csv_cell(c):
    if c is None:
        return ""
    if c is True:
        return "true"
    if c is False:
        return "false"
    return c


def _cmd_query_eval(args):
    db = database.db_from_obj(_read_json(args.db))
    q = query.parse_query(_read_text(args.query))
    rs = query.evaluate_query(db, q)
    buf = io.StringIO()
    w = csv.writer(buf)  # the default dialect quotes and ends lines per RFC 4180
    w.writerow(rs.columns)
    for row in rs.rows:
        w.writerow([_csv_cell(c) for c in row])
    _write_out(buf.getvalue(), args)


# ---------------------------------------------------------------------------
# doc verbs


def _load_doc(path: str):
    d = doc.node_from_obj(_read_json(path))
    if not d.nid:
        doc.assign_nids(d)
    return d


def _cmd_doc_apply(args):
    d = _load_doc(args.doc)
    edits = [doc.edit_from_obj(o) for o in _read_jsonl(args.edits)]
    res = doc.fold(d, edits)
    for n in res.notes:
        _diag({"note": n})
    _emit_json(doc.node_to_obj(res.doc), args)


def _cmd_doc_merge(args):
    base = _load_doc(args.base)
    ours = [doc.edit_from_obj(o) for o in _read_jsonl(args.ours)]
    theirs = [doc.edit_from_obj(o) for o in _read_jsonl(args.theirs)]
    res = doc.merge(base, ours, theirs, author_priority=args.author_priority)
    for c in res.conflicts:
        _diag({"conflict": doc.conflict_to_obj(c)})
    for qn in res.questions:
        _diag({"question": doc.question_to_obj(qn)})
    for n in res.notes:
        _diag({"note": n})
    _emit_json(doc.node_to_obj(res.doc), args)


def _cmd_doc_eval(args):
    if (args.formula is None) == (args.formula_file is None):
        raise _Usage("doc eval needs exactly one of --formula / --formula-file")
    d = _load_doc(args.doc)
    src = args.formula if args.formula is not None else _read_text(args.formula_file)
    _emit_json(formula.evaluate(d, formula.parse_formula(src)), args)


# ---------------------------------------------------------------------------
# lens verbs


def _load_lens(path: str):
    obj = _read_json(path)
    op = obj.get("op")
    if op in ("extract-entity", "absorb-entity"):
        return lens.lens_for(entity.corr_from_obj(obj))
    if op == "multiplicity":
        return lens.lens_for(lens.MultiplicityChange(obj["scalar"], obj["list"]))
    raise lens.Unsupported(f"no lens for op {op!r}")


def _cmd_lens_fwd(args):
    ln = _load_lens(args.lens)
    raw = _read_json(args.value)
    if isinstance(ln, lens.ExtractEntityLens):
        _emit_json(database.db_to_obj(ln.fwd(database.db_from_obj(raw))), args)
    else:
        _emit_json(ln.fwd(raw), args)


def _cmd_lens_bwd(args):
    ln = _load_lens(args.lens)
    raw = _read_json(args.value)
    if isinstance(ln, lens.ExtractEntityLens):
        res = ln.bwd(database.db_from_obj(raw))
        value = database.db_to_obj(res.value)
    else:
        res = ln.bwd(raw)
        value = res.value
    for e in res.report.entries:
        _diag({"drop": e.to_obj()})
    _emit_json(value, args)


def _cmd_lens_put(args):
    ln = _load_lens(args.lens)
    if not isinstance(ln, lens.MultiplicityLens):
        raise lens.Unsupported("putback is a multiplicity-lens operation")
    write = _read_json(args.write)
    current = _read_json(args.current)
    try:
        out = ln.putback(write, current, args.policy)
    except lens.PolicyRequired as err:
        if not _interactive(args):
            raise
        _diag(err.to_json_obj())
        policy = _ask("write policy (only-new / replace-head / prepend)? ")
        out = ln.putback(write, current, policy)
    _emit_json(out, args)


def _cmd_lens_transport(args):
    ln = _load_lens(args.lens)
    edit = lens.db_edit_from_obj(_read_json(args.edit))
    db = database.db_from_obj(_read_json(args.db)) if args.db else None
    tdb = database.db_from_obj(_read_json(args.target_db)) if args.target_db else None
    edits, report = lens.transport_edit(edit, ln, args.direction, db=db, target_db=tdb)
    for e in report.entries:
        _diag({"drop": e.to_obj()})
    _emit_json({"edits": [lens.db_edit_to_obj(e) for e in edits]}, args)


# ---------------------------------------------------------------------------
# machine sessions


def _step_record(m, rt, rec, base):
    """One session record against a live machine; returns (m, rt, trace line)."""
    if "event" in rec:
        res = machine.step(m, rt, rec["event"])
        line = {"event": rec["event"], "fired": res.fired, "state": res.state}
        if res.note:
            line["note"] = res.note
        return m, rt, line
    if "enqueue" in rec:
        machine.enqueue(rt, rec["enqueue"])
        return m, rt, {"enqueued": rec["enqueue"], "pending": list(rt.pending)}
    if "drain" in rec:
        fired = []
        for res in machine.drain(m, rt):
            o = {"fired": res.fired, "state": res.state}
            if res.note:
                o["note"] = res.note
            fired.append(o)
        return m, rt, {"drained": fired}
    if "patch" in rec:
        spec = rec["patch"]
        if isinstance(spec, str):
            path = spec if os.path.isabs(spec) else os.path.join(base, spec)
            pobj, label = _read_json(path), spec
        else:
            pobj, label = dict(spec), "inline"
        for k in ("currentStateStrategy", "pendingEventStrategy"):
            if k in rec:
                pobj[k] = rec[k]
        m, rt, notes = machine.patch(m, rt, machine.patch_from_obj(pobj))
        line = {"patched": label, "state": rt.current}
        if notes:
            line["notes"] = list(notes)
        return m, rt, line
    raise ScriptError(f"unknown session record with keys {sorted(rec)}")


def _cmd_sm_run(args):
    m = machine.parse_machine(_read_text(args.machine))
    rt = machine.start(m)
    base = os.path.dirname(os.path.abspath(args.session))
    lines = []
    for rec in _read_jsonl(args.session):
        m, rt, line = _step_record(m, rt, rec, base)
        lines.append(line)
    lines.append({"final": machine.rt_to_obj(rt)})
    _write_out("".join(types.canonical_dumps(l) + "\n" for l in lines), args)


# ---------------------------------------------------------------------------
# live sessions: typed state or a machine, evolving without a restart


def _require_conforming(v, t, defs):
    rep = types.conforms(v, t, defs)
    if not rep.ok:
        raise ScriptError(
            "value does not conform to the live type",
            violations=[["/".join(str(s) for s in p), msg] for p, msg in rep.violations],
        )


def _cmd_live_run(args):
    base = os.path.dirname(os.path.abspath(args.script))
    mode = None  # "machine" | "typed", set by the first record
    m = rt = None
    cur_t = cur_v = None
    defs = {}
    lines = []

    for rec in _read_jsonl(args.script):
        if "machine" in rec:
            path = rec["machine"]
            if not os.path.isabs(path):
                path = os.path.join(base, path)
            m = machine.parse_machine(_read_text(path))
            rt = machine.start(m)
            mode = "machine"
            lines.append({"machine": m.name, "state": rt.current})
        elif "state" in rec:
            spec = rec["state"]
            defs = {k: types.type_from_obj(v) for k, v in spec.get("defs", {}).items()}
            types.check_defs(defs)
            cur_t = types.type_from_obj(spec["type"])
            cur_v = types.value_from_obj(spec["value"])
            _require_conforming(cur_v, cur_t, defs)
            mode = "typed"
            lines.append({"state": types.value_to_obj(cur_v)})
        elif mode == "machine":
            m, rt, line = _step_record(m, rt, rec, base)
            lines.append(line)
        elif mode == "typed" and "value" in rec:
            v = types.value_from_obj(rec["value"])
            _require_conforming(v, cur_t, defs)
            cur_v = v
            lines.append({"state": types.value_to_obj(cur_v)})
        elif mode == "typed" and "append" in rec:
            if not isinstance(cur_v, types.ListVal):
                raise ScriptError("append needs the live state to be a list")
            v = types.ListVal(cur_v.items + (types.value_from_obj(rec["append"]),))
            _require_conforming(v, cur_t, defs)
            cur_v = v
            lines.append({"state": types.value_to_obj(cur_v)})
        elif mode == "typed" and "edit" in rec:
            # the live-programming move: type edit + derived data migration,
            # committed together or not at all
            e = types.edit_from_obj(rec["edit"])
            plan = _derive(cur_t, e, _parse_hint(rec.get("hints")), defs, args)
            new_v = migrate.migrate_value(plan, cur_v)
            new_t = types.apply_type_edit(cur_t, e, defs)
            _require_conforming(new_v, new_t, defs)
            cur_t, cur_v = new_t, new_v
            lines.append(
                {"applied": types.edit_to_obj(e), "state": types.value_to_obj(cur_v)}
            )
        else:
            raise ScriptError(
                f"record with keys {sorted(rec)} needs a live state established first"
            )

    if mode == "machine":
        lines.append({"final": {"machine": machine.rt_to_obj(rt)}})
    elif mode == "typed":
        lines.append(
            {"final": {"type": types.type_to_obj(cur_t), "value": types.value_to_obj(cur_v)}}
        )
    else:
        lines.append({"final": None})
    _write_out("".join(types.canonical_dumps(l) + "\n" for l in lines), args)


# ---------------------------------------------------------------------------
# argv wiring


def _leaf(sub, name, fn, help_):
    p = sub.add_parser(name, help=help_)
    p.set_defaults(handler=fn)
    p.add_argument("--out", metavar="PATH", help="write primary output here instead of stdout")
    # default=SUPPRESS so a leaf parse doesn't clobber a root-level --interactive
    p.add_argument(
        "--interactive", action="store_true", default=argparse.SUPPRESS, help=argparse.SUPPRESS
    )
    return p


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="schemakit",
        description="co-evolve schemas, data, queries, documents, and running machines",
    )
    ap.add_argument(
        "--interactive",
        action="store_true",
        help="answer pending questions on stdin instead of failing",
    )
    sub = ap.add_subparsers(dest="group", metavar="group")

    g = sub.add_parser("type", help="structural types: diff and edit replay").add_subparsers(
        dest="verb", metavar="verb"
    )
    p = _leaf(g, "diff", _cmd_type_diff, "edit script turning one type into another")
    p.add_argument("--old", required=True, metavar="TYPE.json")
    p.add_argument("--new", required=True, metavar="TYPE.json")
    p.add_argument("--renames", metavar="R.json", help="explicit rename directives")
    p = _leaf(g, "apply", _cmd_type_apply, "apply a type edit (or list of edits)")
    p.add_argument("--type", required=True, metavar="TYPE.json")
    p.add_argument("--edit", required=True, metavar="EDIT.json")
    p.add_argument("--defs", metavar="DEFS.json")

    p = _leaf(sub, "migrate", _cmd_migrate, "derive/run the data migration for a type edit")
    p.add_argument("--state", metavar="VALUE.json")
    p.add_argument("--plan", metavar="PLAN.json")
    p.add_argument("--type", metavar="TYPE.json")
    p.add_argument("--edit", metavar="EDIT.json")
    p.add_argument("--hints", metavar="HINTS.json")
    p.add_argument("--defs", metavar="DEFS.json")
    p.add_argument("--emit-plan", metavar="PATH", help="also write the derived plan here")

    g = sub.add_parser("db", help="keyed-table database evolution").add_subparsers(
        dest="verb", metavar="verb"
    )
    p = _leaf(g, "extract", _cmd_db_extract, "move columns into a new keyed entity table")
    p.add_argument("--db", required=True, metavar="DB.json")
    p.add_argument("--table", metavar="NAME", help="source table (default: the only one)")
    p.add_argument("--cols", required=True, metavar="a,b,c")
    p.add_argument("--new", required=True, metavar="NAME")
    p.add_argument("--key", required=True, metavar="COL")
    p.add_argument("--fk", required=True, metavar="COL")
    p.add_argument("--corr", metavar="PATH", help="write the correspondence here")
    p = _leaf(g, "absorb", _cmd_db_absorb, "join a referenced table back in")
    p.add_argument("--db", required=True, metavar="DB.json")
    p.add_argument("--table", required=True, metavar="NAME", help="referencing table")
    p.add_argument("--fk", required=True, metavar="COL")
    p = _leaf(g, "merge", _cmd_db_merge, "merge rows that denote the same entity")
    p.add_argument("--db", required=True, metavar="DB.json")
    p.add_argument("--table", required=True, metavar="NAME")
    p.add_argument("--keys", required=True, metavar="k1,k2,..")
    p.add_argument("--resolution", metavar="R.json", help="column -> value overrides")
    p = _leaf(g, "split", _cmd_db_split, "split one entity row into two")
    p.add_argument("--db", required=True, metavar="DB.json")
    p.add_argument("--table", required=True, metavar="NAME")
    p.add_argument("--key", required=True, metavar="KEY")
    p.add_argument(
        "--reassignment",
        metavar="R.json",
        help='[[["Table", key], "old"|"new"], ...] for every referencing row',
    )

    g = sub.add_parser("query", help="SQL-subset parse/eval/rewrite").add_subparsers(
        dest="verb", metavar="verb"
    )
    p = _leaf(g, "rewrite", _cmd_query_rewrite, "rewrite a query through a correspondence")
    p.add_argument("--query", required=True, metavar="Q.sql")
    p.add_argument("--correspondence", required=True, metavar="C.json")
    p = _leaf(g, "eval", _cmd_query_eval, "evaluate a query; CSV on stdout")
    p.add_argument("--db", required=True, metavar="DB.json")
    p.add_argument("--query", required=True, metavar="Q.sql")

    g = sub.add_parser("doc", help="attributed trees: edit logs, merge, formulas").add_subparsers(
        dest="verb", metavar="verb"
    )
    p = _leaf(g, "apply", _cmd_doc_apply, "replay an edit log over a document")
    p.add_argument("--doc", required=True, metavar="DOC.json")
    p.add_argument("--edits", required=True, metavar="LOG.jsonl")
    p = _leaf(g, "merge", _cmd_doc_merge, "three-way merge of two edit logs")
    p.add_argument("--base", required=True, metavar="DOC.json")
    p.add_argument("--ours", required=True, metavar="LOG.jsonl")
    p.add_argument("--theirs", required=True, metavar="LOG.jsonl")
    p.add_argument(
        "--author-priority",
        metavar="AUTHOR",
        help="on conflict, keep this author's edit instead of skipping both",
    )
    p = _leaf(g, "eval", _cmd_doc_eval, "evaluate a path formula against a document")
    p.add_argument("--doc", required=True, metavar="DOC.json")
    p.add_argument("--formula", metavar="TEXT")
    p.add_argument("--formula-file", metavar="F.txt")

    g = sub.add_parser("lens", help="bidirectional transforms across one schema change").add_subparsers(
        dest="verb", metavar="verb"
    )
    p = _leaf(g, "fwd", _cmd_lens_fwd, "old-shape value -> new shape")
    p.add_argument("--lens", required=True, metavar="LENS.json")
    p.add_argument("--value", required=True, metavar="V.json")
    p = _leaf(g, "bwd", _cmd_lens_bwd, "new-shape value -> old shape (drops reported)")
    p.add_argument("--lens", required=True, metavar="LENS.json")
    p.add_argument("--value", required=True, metavar="V.json")
    p = _leaf(g, "put", _cmd_lens_put, "write an old-shape value into new-shape data")
    p.add_argument("--lens", required=True, metavar="LENS.json")
    p.add_argument("--write", required=True, metavar="W.json")
    p.add_argument("--current", required=True, metavar="C.json")
    p.add_argument("--policy", choices=lens.WRITE_POLICIES)
    p = _leaf(g, "transport", _cmd_lens_transport, "carry a database edit across the lens")
    p.add_argument("--lens", required=True, metavar="LENS.json")
    p.add_argument("--edit", required=True, metavar="E.json")
    p.add_argument("--direction", required=True, choices=("fwd", "bwd"))
    p.add_argument("--db", metavar="DB.json", help="source-side database, when needed")
    p.add_argument("--target-db", metavar="DB.json", help="target-side database, when needed")

    g = sub.add_parser("sm", help="state-machine DSL").add_subparsers(dest="verb", metavar="verb")
    p = _leaf(g, "run", _cmd_sm_run, "drive a machine through a session script")
    p.add_argument("machine", metavar="MACHINE.sml")
    p.add_argument("session", metavar="SESSION.jsonl")

    g = sub.add_parser("live", help="live sessions mixing data, edits, and patches").add_subparsers(
        dest="verb", metavar="verb"
    )
    p = _leaf(g, "run", _cmd_live_run, "run a live script; state survives its edits")
    p.add_argument("script", metavar="SCRIPT.jsonl")

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:  # argparse already printed the message
        return int(e.code or 0)
    handler = getattr(args, "handler", None)
    if handler is None:
        ap.print_usage(sys.stderr)
        return 2
    try:
        handler(args)
    except _Usage as err:
        sys.stderr.write(f"usage error: {err}\n")
        return 2
    except SchemakitError as err:
        _diag(err.to_json_obj())
        return 1
    except (OSError, ValueError, KeyError) as err:
        _diag({"error": "bad-input", "message": repr(err)})
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
