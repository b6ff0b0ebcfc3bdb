"""Consumption summaries and bound checking against declared contracts."""

import json
import pathlib
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mclcheck import summary as S
from mclcheck.frontend import Tag, load
from mclcheck.symexpr import (
    GridConfig,
    Poly,
    SYM_ZERO,
    SymExpr,
    VerdictKind,
    add,
)

CORPUS = pathlib.Path(__file__).resolve().parent.parent / "corpus"

POSITIVE = [
    "family", "brothers", "callpair", "bigfamily", "family_object",
    "listbuild", "zigzag", "scratchslot", "boxedpath", "eitherway",
    "workqueue", "raggedstore",
]


def load_corpus(name):
    return load((CORPUS / f"{name}.mcl").read_text(), f"{name}.mcl")


def check(name, mode=S.MODE_TYPE):
    return S.check_program(load_corpus(name), mode=mode)


def summarize_in(prog, qname, mode=S.MODE_TYPE):
    methods = {m.qname: m for m in prog.methods()}
    contracts = {q: m.contract for q, m in methods.items()}
    return S.summarize(methods[qname], contracts, mode, prog.class_map())


def row(report, method, clause):
    hits = [r for r in report.rows if r.method == method and r.clause == clause]
    assert len(hits) == 1, f"expected one row for {method} {clause}, got {hits}"
    return hits[0]


def mode_for(name):
    return S.MODE_OBJECT if "object" in name else S.MODE_TYPE


# ------------------------------------------------------------ entry vars


def test_entry_vars_cover_params_and_fields():
    prog = load_corpus("family")
    m = prog.method("Family.AddMember")
    names = S.entry_vars(m, prog.class_map()["Family"])
    assert names == {"this._size", "this._members.length"}
    cf = prog.method("Family.CreateFamily")
    assert "firstNames.length" in S.entry_vars(cf, prog.class_map()["Family"])


def test_expr_poly_reads_arithmetic_and_lengths():
    from mclcheck.frontend import NewStmt
    prog = load_corpus("bigfamily")
    m = prog.method("Family.CreateBigFamily")
    new = next(s for s in m.body if isinstance(s, NewStmt))
    p = S.expr_poly(new.args[1], {"n"})
    n = Poly.var("n")
    assert p == n * n * Fraction(1, 2) + n * Fraction(1, 2)


def test_expr_poly_rejects_unknown_names():
    from mclcheck.frontend import CallStmt, ForStmt
    prog = load_corpus("family")
    m = prog.method("Family.CreateFamily")
    loop = next(s for s in m.body if isinstance(s, ForStmt))
    call = next(s for s in loop.body if isinstance(s, CallStmt))
    # firstNames[i - 1] is not an entry-constant integer
    assert S.expr_poly(call.args[0], {"firstNames.length"}) is None


# -------------------------------------------------- straight-line composition


def test_callpair_call_part_is_exact():
    prog = load_corpus("callpair")
    s = summarize_in(prog, "A.m")
    n = Poly.var("n")
    assert s.call_part["A"].same_value(SymExpr.of(n + 3))
    assert s.mem_req["A"].same_value(SymExpr.of(n + 5))


def test_callpair_escape_split():
    s = summarize_in(load_corpus("callpair"), "A.m")
    assert s.esc[(Tag.ret(), "A")].same_value(SymExpr.of(2))
    assert s.esc[(Tag.user("Param"), "A")].same_value(SymExpr.of(1))


def test_callpair_verifies_exactly():
    rep = check("callpair")
    assert rep.overall == VerdictKind.VERIFIED
    r = row(rep, "A.m", "memreq<A>")
    assert r.computed == "n + 5" and r.declared == "n + 5"


def test_callee_requirement_checked_under_its_precondition():
    # m2 declares k with k >= 2 although it only ever allocates 2
    rep = check("callpair")
    assert row(rep, "A.m2", "memreq<A>").verdict.kind == VerdictKind.VERIFIED


# ------------------------------------------------------------ loop collapse


def test_family_bounds_are_exact():
    prog = load_corpus("family")
    s = summarize_in(prog, "Family.CreateFamily")
    length = Poly.var("firstNames.length")
    assert s.mem_req["Logger"].same_value(SymExpr.of(1))
    assert s.mem_req["Person"].same_value(SymExpr.of(length))
    assert s.mem_req["Person[]"].same_value(SymExpr.of(length))
    assert s.mem_req["Family"].same_value(SymExpr.of(1))
    assert s.esc[(Tag.ret(), "Person")].same_value(SymExpr.of(length))


def test_nested_loops_sum_to_triangle():
    prog = load_corpus("bigfamily")
    s = summarize_in(prog, "Family.CreateBigFamily")
    n = Poly.var("n")
    tri = n * n * Fraction(1, 2) + n * Fraction(1, 2)
    assert s.esc[(Tag.ret(), "Person")].same_value(SymExpr.of(tri))
    assert s.mem_req["Person"].same_value(SymExpr.of(tri))
    # the per-iteration Logger temporary is recycled, the loop only sums it
    assert s.mem_req["Logger"].same_value(SymExpr.of(n))


def test_growing_array_sums_lengths():
    rep = check("raggedstore")
    assert rep.overall == VerdictKind.VERIFIED
    n = Poly.var("n")
    s = summarize_in(load_corpus("raggedstore"), "Stash.grow")
    tri = n * n * Fraction(1, 2) + n * Fraction(1, 2)
    assert s.mem_req["Cell[]"].same_value(SymExpr.of(tri))


def test_branches_are_added_not_maxed():
    s = summarize_in(load_corpus("eitherway"), "Chooser.pick")
    assert s.mem_req["Thing"].same_value(SymExpr.of(2))
    assert check("eitherway").overall == VerdictKind.VERIFIED


def test_loop_and_trailing_call_share_method_accounting():
    s = summarize_in(load_corpus("workqueue"), "Worker.drive")
    n = Poly.var("n")
    assert s.mem_req["Buf"].same_value(SymExpr.of(n + 4))
    assert s.esc[(Tag.this(), "Buf")].same_value(SymExpr.of(n))
    assert check("workqueue").overall == VerdictKind.VERIFIED


# ----------------------------------------------------------- recursion


def test_recursive_builders_verify_assume_guarantee():
    for name, qname in (("listbuild", "Node.build"), ("zigzag", "Link.zig")):
        rep = check(name)
        assert rep.overall == VerdictKind.VERIFIED
        r = row(rep, qname, "memreq<" + qname.split(".")[0] + ">")
        assert any("assume-guarantee" in note for note in r.notes)


def test_recursion_without_contract_is_rejected():
    src = """
    class R {
        void spin(int n) {
            if (n > 0) {
                this.spin(n - 1);
            }
        }
    }
    """
    with pytest.raises(S.CyclicWithoutContract) as exc:
        S.check_program(load(src, "spin.mcl"))
    assert exc.value.component == ["R.spin"]
    assert exc.value.missing == ["R.spin"]


# -------------------------------------------------------------- object mode


def test_object_mode_collapses_callee_types():
    prog = load_corpus("family_object")
    s = summarize_in(prog, "Family.CreateFamily", mode=S.MODE_OBJECT)
    length = Poly.var("firstNames.length")
    assert s.mem_req[S.OBJECT_KEY].same_value(SymExpr.of(length * 2 + 2))
    assert s.esc[(Tag.ret(), S.OBJECT_KEY)].same_value(SymExpr.of(length * 2 + 1))
    assert check("family_object", mode=S.MODE_OBJECT).overall == VerdictKind.VERIFIED


def test_object_mode_derives_bounds_from_per_type_contracts():
    # AddMember declares no object clause: its types are summed instead
    rep = check("family_object", mode=S.MODE_OBJECT)
    r = row(rep, "Family.AddMember", "memreq<object>")
    assert r.verdict.kind == VerdictKind.VERIFIED
    assert r.computed == "2"


def test_type_mode_flags_hidden_types_as_undeclared():
    rep = check("family_object", mode=S.MODE_TYPE)
    r = row(rep, "Family.CreateFamily", "memreq<Family>")
    assert r.verdict.kind == VerdictKind.VIOLATED
    assert r.declared is None
    assert any("undeclared consumption" in note for note in r.notes)


# ------------------------------------------------------------- faulty corpus


def test_low_bound_has_witness():
    rep = check("faulty_low_bound")
    assert rep.overall == VerdictKind.VIOLATED
    r = row(rep, "Family.CreateFamily", "memreq<Person>")
    assert r.verdict.kind == VerdictKind.VIOLATED
    assert r.verdict.witness == {"firstNames.length": 0}
    others = [x for x in rep.rows if x.verdict.kind != VerdictKind.VERIFIED and x is not r]
    assert others == []


def test_zero_escape_starves_caller_and_callee():
    rep = check("faulty_zero_esc")
    assert row(rep, "Family.AddMember", "esc<Person>(this)").verdict.kind \
        == VerdictKind.VIOLATED
    assert row(rep, "Family.CreateFamily", "memreq<Person>").verdict.kind \
        == VerdictKind.VIOLATED


def test_negative_bound_fails_at_zero():
    rep = check("faulty_negative_bound")
    r = row(rep, "Maker.bake", "memreq<Thing>")
    assert r.verdict.kind == VerdictKind.VIOLATED
    assert r.verdict.witness == {"n": 0}


def test_object_low_bound_fails_in_object_mode():
    rep = check("faulty_object_low", mode=S.MODE_OBJECT)
    r = row(rep, "Family.CreateFamily", "memreq<object>")
    assert r.verdict.kind == VerdictKind.VIOLATED
    assert r.verdict.witness == {"firstNames.length": 1}


def test_undeclared_class_is_a_violation():
    rep = check("faulty_undeclared_class")
    r = row(rep, "Quiet.assemble", "memreq<Widget>")
    assert r.verdict.kind == VerdictKind.VIOLATED
    assert r.declared is None and r.verdict.witness == {}


def test_mid_loop_peak_is_not_verified():
    rep = check("faulty_humpcall")
    r = row(rep, "Mill.hump", "memreq<Blob>")
    assert r.verdict.kind == VerdictKind.UNVERIFIED
    assert "monotonicity-unproven" in r.verdict.reason
    assert row(rep, "Mill.churn", "memreq<Blob>").verdict.kind == VerdictKind.VERIFIED
    assert rep.exit_code() == 2


def test_narrow_iteration_space_is_not_verified():
    rep = check("faulty_narrow_space")
    for clause in ("memreq<Token>", "esc<Token>(this)"):
        r = row(rep, "Spool.wind", clause)
        assert r.verdict.kind == VerdictKind.UNVERIFIED
        assert "iteration-space-mismatch" in r.verdict.reason


def test_skipped_precondition_is_a_static_blind_spot():
    # callee preconditions are a runtime obligation, not a static one
    assert check("faulty_precondition_skip").overall == VerdictKind.VERIFIED


def test_lifetime_violations_reach_the_report():
    rep = check("faulty_missing_destesc")
    bad = [r for r in rep.rows if r.verdict.kind == VerdictKind.VIOLATED]
    assert [r.clause for r in bad] == ["lifetime(Family.AddMember#1)"]
    assert bad[0].verdict.reason == "EscapesButUnannotated"


def test_suppressed_site_is_reported_verified_with_note():
    rep = check("scratchslot")
    r = row(rep, "Workbench.rebuild", "lifetime(Workbench.rebuild#1)")
    assert r.verdict.kind == VerdictKind.VERIFIED
    assert any("dest_local" in note for note in r.notes)


# ----------------------------------------------------- report plumbing


@pytest.mark.parametrize("name", POSITIVE)
def test_positive_corpus_verifies(name):
    rep = check(name, mode=mode_for(name))
    assert rep.overall == VerdictKind.VERIFIED
    assert rep.exit_code() == 0


def test_exit_codes():
    assert check("family").exit_code() == 0
    assert check("faulty_low_bound").exit_code() == 1
    assert check("faulty_humpcall").exit_code() == 2


def test_report_json_is_stable_and_serializable():
    a = json.dumps(check("bigfamily").to_json(), sort_keys=True)
    b = json.dumps(check("bigfamily").to_json(), sort_keys=True)
    assert a == b
    data = json.loads(a)
    assert data["overall"] == "Verified"
    assert all({"method", "clause", "verdict"} <= set(c) for c in data["clauses"])


def test_rows_sorted_by_method():
    rep = check("family")
    assert [r.method for r in rep.rows] == sorted(r.method for r in rep.rows)


def test_trivially_satisfied_clause_is_noted():
    src = """
    class C {
        void quiet(int n) {
            requires(n >= 0);
            memreq<C>(n);
            int x = 0;
            x = x + 1;
        }
    }
    """
    rep = S.check_program(load(src, "quiet.mcl"))
    r = row(rep, "C.quiet", "memreq<C>")
    assert r.verdict.kind == VerdictKind.VERIFIED
    assert any("trivially satisfied" in note for note in r.notes)


def test_fractional_declared_bound_is_not_verified():
    src = """
    class C {
        void half(int n) {
            requires(n >= 0);
            memreq<C>(n / 2);
            int x = 0;
            x = x + 1;
        }
    }
    """
    rep = S.check_program(load(src, "half.mcl"))
    r = row(rep, "C.half", "memreq<C>")
    assert r.verdict.kind == VerdictKind.UNVERIFIED
    assert "integer-valued" in r.verdict.reason


def test_undeclared_escape_is_a_violation():
    src = """
    class C {
        C make() {
            memreq<C>(1);
            dest_esc(return);
            C c = new C();
            return c;
        }
    }
    """
    rep = S.check_program(load(src, "make.mcl"))
    r = row(rep, "C.make", "esc<C>(return)")
    assert r.verdict.kind == VerdictKind.VIOLATED
    assert r.declared is None
    assert any("undeclared escape" in note for note in r.notes)


def test_contractless_method_summary_is_empty():
    prog = load_corpus("family")
    s = summarize_in(prog, "Logger.logMessage")
    assert s.mem_req == {} and s.esc == {}


# ------------------------------------------------------------- properties


@pytest.mark.parametrize("name", POSITIVE)
def test_escapes_never_exceed_requirement(name):
    # a method cannot hand out more than it charged its caller for
    prog = load_corpus(name)
    mode = mode_for(name)
    methods = {m.qname: m for m in prog.methods()}
    contracts = {q: m.contract for q, m in methods.items()}
    grid = GridConfig(lo=0, hi=6)
    for qname, m in methods.items():
        s = S.summarize(m, contracts, mode, prog.class_map())
        for key in {k for (_, k) in s.esc}:
            total = SYM_ZERO
            for (_, k), e in s.esc.items():
                if k == key:
                    total = add(total, e)
            need = s.mem_req.get(key, SYM_ZERO)
            if need.flags or total.flags:
                continue
            names = sorted(total.variables() | need.variables()
                           | {v for c in m.contract.requires for v in c.variables()})
            import itertools
            for point in itertools.product(range(grid.lo, grid.hi + 1),
                                           repeat=len(names)):
                env = dict(zip(names, point))
                if not all(c.holds(env) for c in m.contract.requires):
                    continue
                assert total.eval(env) <= need.eval(env), (qname, key, env)


@settings(max_examples=40, deadline=None)
@given(lo=st.integers(0, 3), count=st.integers(0, 4), per=st.integers(1, 3))
def test_concrete_loop_matches_unrolled(lo, count, per):
    hi = lo + count - 1
    loop_body = "\n                ".join(
        f"Thing t{j} = new Thing();" for j in range(per))
    flat_body = "\n            ".join(
        f"Thing u{k}x{j} = new Thing();"
        for k in range(count) for j in range(per))
    looped = f"""
    class Thing {{ int v; }}
    class Host {{
        void go() {{
            memreq<Thing>({max(per * count, 1)});
            for (i = {lo} .. {hi}) {{
                {loop_body}
            }}
        }}
    }}
    """
    unrolled = f"""
    class Thing {{ int v; }}
    class Host {{
        void go() {{
            memreq<Thing>({max(per * count, 1)});
            {flat_body}
            int x = 0;
            x = x + 1;
        }}
    }}
    """
    a = summarize_in(load(looped, "a.mcl"), "Host.go")
    b = summarize_in(load(unrolled, "b.mcl"), "Host.go")
    want = SymExpr.of(per * count)
    assert a.mem_req.get("Thing", SYM_ZERO).same_value(want)
    assert b.mem_req.get("Thing", SYM_ZERO).same_value(want)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(0, 6))
def test_symbolic_triangle_matches_concrete_runs(n):
    s = summarize_in(load_corpus("bigfamily"), "Family.CreateBigFamily")
    computed = s.mem_req["Person"]
    brute = sum(range(1, n + 1))
    assert computed.eval({"n": n}) == brute
