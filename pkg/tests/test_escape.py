"""Heap-shape analysis: graph construction, summaries, lifetime verdicts."""

import pathlib

import pytest

from mclcheck import escape
from mclcheck.escape import (
    ANNOTATED_CAPTURED,
    ESCAPES_UNANNOTATED,
    OK,
    SUPPRESSED,
    TAG_MISMATCH,
    analyze,
    inside_node,
    param_node,
    reachable,
    site_id_map,
    to_dot,
)
from mclcheck.frontend import load

CORPUS = pathlib.Path(__file__).resolve().parent.parent / "corpus"


def load_corpus(name):
    return load((CORPUS / f"{name}.mcl").read_text(), f"{name}.mcl")


def kinds(an, qname):
    return [v.kind for v in an.lifetimes[qname]]


# ----------------------------------------------------------------- shapes


def test_ctor_temporary_is_not_reachable_from_receiver():
    an = analyze(load_corpus("family"))
    g = an.graphs["Person.Person"]
    logger = inside_node("Person.Person#1")
    assert logger in g.N
    assert not reachable(g, {param_node("this")}, logger)
    assert not g.returned


def test_added_member_reachable_from_receiver():
    an = analyze(load_corpus("family"))
    g = an.graphs["Family.AddMember"]
    person = inside_node("Family.AddMember#1")
    assert reachable(g, {param_node("this")}, person)
    # and the path runs through the members array
    mid = g.targets(param_node("this"), "_members")
    assert mid and any(person in g.targets(n, "[*]") for n in mid)


def test_node_reachable_from_itself():
    an = analyze(load_corpus("family"))
    g = an.graphs["Person.Person"]
    logger = inside_node("Person.Person#1")
    assert reachable(g, {logger}, logger)


def test_empty_body_has_only_param_nodes():
    prog = load(
        """
        class C {
            C() { }
            void nop(C other, int n) { }
        }
        """,
        "t.mcl",
    )
    g = analyze(prog).graphs["C.nop"]
    assert {n.kind for n in g.N} == {"param"}
    assert {n.key for n in g.N} == {"this", "other"}
    assert not g.E


def test_captured_temporary_pruned_from_summary():
    an = analyze(load_corpus("family"))
    s = an.summaries["Person.Person"]
    assert inside_node("Person.Person#1") not in s.ptg.N
    assert s.escaping == {}


def test_summary_keeps_escaping_objects():
    an = analyze(load_corpus("family"))
    s = an.summaries["Family.AddMember"]
    person = inside_node("Family.AddMember#1")
    assert person in s.ptg.N
    assert s.escaping["Family.AddMember#1"] == ["This"]


def test_inlined_callee_objects_escape_through_caller():
    an = analyze(load_corpus("family"))
    g = an.graphs["Family.CreateFamily"]
    person = inside_node("Family.AddMember#1")
    arr = inside_node("Family.Family#1")
    assert reachable(g, g.returned, arr)
    assert reachable(g, g.returned, person)


def test_self_loop_field_chain_terminates():
    prog = load(
        """
        class Link {
            Link next;

            Link() { }

            Link walk(Link start) {
                memreq<Link>(0);

                Link cur = start;
                for (i = 1 .. 10) {
                    cur = cur.next;
                }
                return cur;
            }
        }
        """,
        "t.mcl",
    )
    g = analyze(prog).graphs["Link.walk"]
    # load chain is cut off at the collapse depth with a self edge
    assert any(a == b and f == "next" for (a, f, b) in g.E)
    assert all(n.depth <= escape.LOAD_DEPTH_CAP for n in g.N)


def test_mutual_recursion_reaches_fixpoint():
    an = analyze(load_corpus("zigzag"))
    for q, s in an.summaries.items():
        assert s.method == q
    # every allocation in the cycle escapes via the returned chain
    for q in an.lifetimes:
        assert all(v.kind == OK for v in an.lifetimes[q])


def test_analysis_is_deterministic():
    a = analyze(load_corpus("bigfamily"))
    b = analyze(load_corpus("bigfamily"))
    for q in a.graphs:
        assert a.graphs[q].canonical() == b.graphs[q].canonical()


# ---------------------------------------------------------------- verdicts


@pytest.mark.parametrize(
    "name",
    ["family", "brothers", "callpair", "bigfamily", "family_object", "listbuild",
     "zigzag", "boxedpath", "eitherway", "workqueue", "raggedstore"],
)
def test_positive_corpus_has_clean_lifetimes(name):
    an = analyze(load_corpus(name))
    for q, vs in an.lifetimes.items():
        for v in vs:
            assert v.kind in (OK, SUPPRESSED), (q, v)


def test_missing_dest_esc_is_flagged():
    an = analyze(load_corpus("faulty_missing_destesc"))
    assert ESCAPES_UNANNOTATED in kinds(an, "Family.AddMember")


def test_missing_add_esc_is_flagged_on_the_call():
    an = analyze(load_corpus("faulty_missing_addesc"))
    bad = [v for v in an.lifetimes["Family.CreateFamily"]
           if v.kind == ESCAPES_UNANNOTATED]
    assert bad and bad[0].where.startswith("Family.CreateFamily@")


def test_swapped_tags_give_two_mismatches():
    an = analyze(load_corpus("faulty_swapped_tags"))
    assert kinds(an, "Person.CreateBrothers").count(TAG_MISMATCH) == 2


def test_phantom_escape_annotation_is_flagged():
    an = analyze(load_corpus("faulty_phantom_escape"))
    assert ANNOTATED_CAPTURED in kinds(an, "Cutter.polish")


def test_dest_local_suppresses_false_alarm():
    an = analyze(load_corpus("scratchslot"))
    assert kinds(an, "Workbench.rebuild") == [SUPPRESSED]
    # without the suppression the imprecise graph raises an alarm
    src = (CORPUS / "scratchslot.mcl").read_text()
    mutated = "\n".join(ln for ln in src.splitlines() if "dest_local" not in ln)
    an2 = analyze(load(mutated, "mut.mcl"))
    assert ESCAPES_UNANNOTATED in kinds(an2, "Workbench.rebuild")


def test_bind_path_resolves_through_fields():
    an = analyze(load_corpus("boxedpath"))
    assert all(v.kind == OK for v in an.lifetimes["Registry.fill"])


# --------------------------------------------------------------------- dot


def test_dot_export_shapes_and_ids():
    prog = load_corpus("family")
    an = analyze(prog)
    ids = site_id_map(prog)
    dot = to_dot("Family.AddMember", an.graphs["Family.AddMember"], ids)
    person_id = ids["Family.AddMember#1"]
    assert f"n{person_id} [shape=ellipse style=solid" in dot
    assert "p_this [shape=ellipse style=dashed" in dot
    assert '[label="_members"]' in dot
    assert dot == to_dot("Family.AddMember", an.graphs["Family.AddMember"], ids)
