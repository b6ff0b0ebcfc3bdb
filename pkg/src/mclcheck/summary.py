"""Symbolic consumption summaries and bound verification.

A method is summarized against its callees' declared contracts, never
their bodies: per class, a straight-line call sequence costs the largest
headroom any single call needs (its requirement minus what it leaves
escaped) plus everything the calls leave escaped.  Loops sum their own
allocations and callee escapes over the iteration space and keep one
maximized headroom term, which is what lets temporaries be recycled
across iterations.  The declared bounds are then discharged with
entails_leq; lifetime findings from the heap analysis are folded into
the same report.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
import itertools

from . import callgraph, escape
from .frontend.syntax import (
    Binary,
    CallStmt,
    ClassDecl,
    Expr,
    FieldRef,
    ForStmt,
    IfStmt,
    IntLit,
    LengthRef,
    MethodContract,
    MethodDecl,
    NewStmt,
    OutArg,
    ParenExpr,
    Program,
    Stmt,
    Tag,
    ThisRef,
    Unary,
    VarRef,
)
from .symexpr import (
    FLAG_BAD_ARG,
    FLAG_SPACE_MISMATCH,
    GridConfig,
    GridTooLarge,
    IterSpace,
    LinConstraint,
    Poly,
    SYM_ZERO,
    SymExpr,
    Verdict,
    VerdictKind,
    ZERO,
    add,
    entails_leq,
    integer_valued_on_grid,
    max_over,
    substitute,
    sum_over,
    sym_max,
)

OBJECT_KEY = "object"

MODE_TYPE = "type"
MODE_OBJECT = "object"


class CyclicWithoutContract(Exception):
    """A recursive component has a member with no contract to assume."""

    def __init__(self, component: list[str], missing: list[str]):
        self.component = component
        self.missing = missing
        super().__init__(
            f"recursive component {{{', '.join(component)}}} has members "
            f"without contracts: {', '.join(missing)}")


class MissingCalleeContract(Exception):
    pass


# --------------------------------------------------------------- entry vars


def entry_vars(method: MethodDecl, cls: ClassDecl) -> set[str]:
    """Names with a fixed integer value at method entry."""
    names: set[str] = set()
    for p in method.params:
        if p.is_out:
            continue
        if p.decl_type.key() == "int":
            names.add(p.name)
        elif p.decl_type.is_array:
            names.add(f"{p.name}.length")
    for f in cls.fields:
        if f.decl_type.key() == "int":
            names.add(f"this.{f.name}")
        elif f.decl_type.is_array:
            names.add(f"this.{f.name}.length")
    return names


def expr_poly(e: Expr, admissible: set[str]) -> Poly | None:
    """Quiet polynomial reading of an argument expression, else None."""
    if isinstance(e, ParenExpr):
        return expr_poly(e.inner, admissible)
    if isinstance(e, IntLit):
        return Poly.const(e.value)
    if isinstance(e, VarRef):
        return Poly.var(e.name) if e.name in admissible else None
    if isinstance(e, FieldRef) and isinstance(e.base, ThisRef):
        name = f"this.{e.field}"
        return Poly.var(name) if name in admissible else None
    if isinstance(e, LengthRef):
        name = None
        if isinstance(e.base, VarRef):
            name = f"{e.base.name}.length"
        elif isinstance(e.base, FieldRef) and isinstance(e.base.base, ThisRef):
            name = f"this.{e.base.field}.length"
        return Poly.var(name) if name in admissible else None
    if isinstance(e, Unary) and e.op == "-":
        p = expr_poly(e.operand, admissible)
        return None if p is None else -p
    if isinstance(e, Binary) and e.op in ("+", "-", "*", "/"):
        a = expr_poly(e.left, admissible)
        b = expr_poly(e.right, admissible)
        if a is None or b is None:
            return None
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if not b.is_const() or b.const_value() == 0:
            return None
        return a.scale(Fraction(1, b.const_value()))
    return None


def contract_binding(callee: MethodDecl, contract: MethodContract,
                     receiver: Expr | None, args: list, admissible: set[str],
                     is_ctor: bool) -> tuple[dict[str, Poly], set[str]]:
    """Map the callee's contract variables to caller-side polynomials.

    Anything that cannot be expressed over the caller's entry values maps
    to zero and raises the unanalyzable-arg flag, which downgrades every
    clause that depends on it.
    """
    used: set[str] = set()
    for e in contract.mem_req.values():
        used |= e.variables()
    for e in contract.esc.values():
        used |= e.variables()
    binding: dict[str, Poly] = {}
    flags: set[str] = set()
    pos_args = [a for a in args if not isinstance(a, OutArg)]
    by_name = {}
    i = 0
    for p in callee.params:
        if p.is_out:
            continue
        if i < len(pos_args):
            by_name[p.name] = pos_args[i]
        i += 1
    for v in sorted(used):
        if v.startswith("this."):
            if is_ctor:
                binding[v] = ZERO  # fields are zero-initialized at entry
            elif isinstance(receiver, ThisRef) or receiver is None:
                if v in admissible:
                    binding[v] = Poly.var(v)
                else:
                    binding[v] = ZERO
                    flags.add(FLAG_BAD_ARG)
            else:
                binding[v] = ZERO
                flags.add(FLAG_BAD_ARG)
        elif v.endswith(".length"):
            pname = v[: -len(".length")]
            arg = by_name.get(pname)
            p = expr_poly(LengthRef(arg), admissible) if arg is not None else None
            if p is None:
                binding[v] = ZERO
                flags.add(FLAG_BAD_ARG)
            else:
                binding[v] = p
        else:
            arg = by_name.get(v)
            p = expr_poly(arg, admissible) if arg is not None else None
            if p is None:
                binding[v] = ZERO
                flags.add(FLAG_BAD_ARG)
            else:
                binding[v] = p
    return binding, flags


# ------------------------------------------------------------ summarization


@dataclass
class ConsumptionSummary:
    method: str
    mem_req: dict[str, SymExpr]
    esc: dict[tuple[Tag, str], SymExpr]
    call_part: dict[str, SymExpr]  # method-level max-headroom + escapes

    def esc_total(self, key: str) -> SymExpr:
        total = SYM_ZERO
        for (_, k), e in self.esc.items():
            if k == key:
                total = add(total, e)
        return total


class _Acc:
    """Per-scope buckets, all keyed by class (or the object pseudo-class)."""

    def __init__(self):
        self.own: dict[str, SymExpr] = {}
        self.diffs: dict[str, list[SymExpr]] = {}
        self.escs: dict[str, list[SymExpr]] = {}
        self.esc_tags: dict[tuple[Tag, str], SymExpr] = {}

    def add_own(self, key: str, e: SymExpr) -> None:
        self.own[key] = add(self.own.get(key, SYM_ZERO), e)

    def add_tag(self, tag: Tag, key: str, e: SymExpr) -> None:
        k = (tag, key)
        self.esc_tags[k] = add(self.esc_tags.get(k, SYM_ZERO), e)

    def keys(self) -> set[str]:
        return set(self.own) | set(self.diffs) | set(self.escs)


def _contract_keys(contract: MethodContract) -> set[str]:
    return set(contract.mem_req) | {key for (_, key) in contract.esc}


def ordered_contract_keys(contract: MethodContract) -> list[str]:
    """Class keys in declaration order: mem_req first, then esc-only ones."""
    keys = list(contract.mem_req)
    for (_, key) in contract.esc:
        if key not in keys:
            keys.append(key)
    return keys


def collapsed_contract(contract: MethodContract, binding: dict[str, Poly]):
    """Callee quantities in object mode: explicit object clauses win."""
    if OBJECT_KEY in _contract_keys(contract):
        mr = contract.mem_req.get(OBJECT_KEY, SYM_ZERO)
        esc_by_tag: dict[Tag, SymExpr] = {}
        for (t, key), e in contract.esc.items():
            if key == OBJECT_KEY:
                esc_by_tag[t] = add(esc_by_tag.get(t, SYM_ZERO), e)
    else:
        mr = SYM_ZERO
        for e in contract.mem_req.values():
            mr = add(mr, e)
        esc_by_tag = {}
        for (t, _), e in contract.esc.items():
            esc_by_tag[t] = add(esc_by_tag.get(t, SYM_ZERO), e)
    mr = substitute(mr, binding)
    esc_by_tag = {t: substitute(e, binding) for t, e in esc_by_tag.items()}
    return mr, esc_by_tag


class _Summarizer:
    def __init__(self, method: MethodDecl, contracts: dict[str, MethodContract],
                 mode: str, class_map: dict[str, ClassDecl], grid: GridConfig):
        self.m = method
        self.cls = class_map[method.cls]
        self.contracts = contracts
        self.mode = mode
        self.class_map = class_map
        self.grid = grid
        self.entry = entry_vars(method, self.cls)
        self.requires: tuple[LinConstraint, ...] = method.contract.requires

    # -- helpers ---------------------------------------------------------------

    def _key(self, type_key: str) -> str:
        return OBJECT_KEY if self.mode == MODE_OBJECT else type_key

    def _poly_or_flag(self, e: Expr, loop_vars: tuple[str, ...]) -> SymExpr:
        p = expr_poly(e, self.entry | set(loop_vars))
        if p is None:
            return SYM_ZERO.with_flags(FLAG_BAD_ARG)
        return SymExpr.of(p)

    def _binding(self, callee: MethodDecl, receiver: Expr | None,
                 args: list, loop_vars: tuple[str, ...], is_ctor: bool):
        return contract_binding(callee, self.contracts[callee.qname], receiver,
                                args, self.entry | set(loop_vars), is_ctor)

    def _call(self, acc: _Acc, callee: MethodDecl, receiver: Expr | None,
              args: list, add_esc, loop_vars: tuple[str, ...], is_ctor: bool) -> None:
        contract = self.contracts[callee.qname]
        if not contract.has_clauses():
            return  # no contract means a declared-zero footprint
        binding, bflags = self._binding(callee, receiver, args, loop_vars, is_ctor)

        if self.mode == MODE_OBJECT:
            mr, esc_by_tag = collapsed_contract(contract, binding)
            entries = [(OBJECT_KEY, mr, esc_by_tag)]
        else:
            entries = []
            for key in sorted(_contract_keys(contract)):
                mr = substitute(contract.mem_req.get(key, SYM_ZERO), binding)
                esc_by_tag = {
                    t: substitute(e, binding)
                    for (t, k), e in contract.esc.items() if k == key
                }
                entries.append((key, mr, esc_by_tag))

        for key, mr, esc_by_tag in entries:
            total_esc = SYM_ZERO
            for e in esc_by_tag.values():
                total_esc = add(total_esc, e)
            # mr - esc: subtract one certified lower alternative of the escape
            low = min(total_esc.alts, key=lambda p: sorted(p.terms))
            diff = SymExpr(
                tuple(p - low for p in mr.alts),
                mr.flags | total_esc.flags | frozenset(bflags),
                mr.guards + total_esc.guards,
            )
            acc.diffs.setdefault(key, []).append(diff)
            acc.escs.setdefault(key, []).append(
                total_esc.with_flags(*bflags) if bflags else total_esc)
            for dst, src in add_esc:
                pulled = esc_by_tag.get(src)
                if pulled is not None:
                    acc.add_tag(dst, key,
                                pulled.with_flags(*bflags) if bflags else pulled)

    # -- scopes ------------------------------------------------------------------

    def scope(self, stmts: list[Stmt], context: tuple[LinConstraint, ...],
              loop_vars: tuple[str, ...]) -> _Acc:
        acc = _Acc()
        for s in stmts:
            self.stmt(s, acc, context, loop_vars)
        return acc

    def stmt(self, s: Stmt, acc: _Acc, context, loop_vars) -> None:
        if isinstance(s, NewStmt):
            key = self._key(s.class_ref.key())
            k = self._poly_or_flag(s.length, loop_vars) if s.class_ref.is_array \
                else SymExpr.of(1)
            acc.add_own(key, k)
            if s.dest_esc is not None:
                acc.add_tag(s.dest_esc, key, k)
            if not s.class_ref.is_array:
                cls = self.class_map.get(s.class_ref.name)
                ctor = cls.ctor() if cls else None
                if ctor is not None:
                    self._call(acc, ctor, None, s.args, s.add_esc, loop_vars,
                               is_ctor=True)
        elif isinstance(s, CallStmt):
            if s.resolved is None:
                return
            callee = self._method_of(s.resolved)
            self._call(acc, callee, s.receiver, s.args, s.add_esc, loop_vars,
                       is_ctor=False)
        elif isinstance(s, IfStmt):
            # flow-insensitive: both branches contribute
            for body in (s.then_body, s.else_body):
                sub = self.scope(body, context, loop_vars)
                self._merge(acc, sub)
        elif isinstance(s, ForStmt):
            self.loop(s, acc, context, loop_vars)

    def _merge(self, acc: _Acc, sub: _Acc) -> None:
        for key, e in sub.own.items():
            acc.add_own(key, e)
        for key, ds in sub.diffs.items():
            acc.diffs.setdefault(key, []).extend(ds)
        for key, es in sub.escs.items():
            acc.escs.setdefault(key, []).extend(es)
        for (t, key), e in sub.esc_tags.items():
            acc.add_tag(t, key, e)

    def loop(self, s: ForStmt, acc: _Acc, context, loop_vars) -> None:
        space = s.resolved_space
        if space is None:
            # header bounds were not entry-constant: nothing provable inside
            body = self.scope(s.body, context, loop_vars + (s.var,))
            for key in body.keys() | {k for (_, k) in body.esc_tags}:
                acc.add_own(key, SYM_ZERO.with_flags(FLAG_BAD_ARG))
            for (t, key) in body.esc_tags:
                acc.add_tag(t, key, SYM_ZERO.with_flags(FLAG_BAD_ARG))
            return

        extra: set[str] = set()
        if s.space is not None and not self._header_inside_space(s, space, context, loop_vars):
            extra.add(FLAG_SPACE_MISMATCH)

        inner_ctx = context + space.constraints
        body = self.scope(s.body, inner_ctx, loop_vars + (s.var,))

        def summed(e: SymExpr) -> SymExpr:
            if e.is_zero():  # keep flags, skip the closed form
                return SymExpr(SYM_ZERO.alts, e.flags, ())
            return sum_over(e, space, context)

        for key in body.keys():
            total = summed(body.own.get(key, SYM_ZERO))
            diffs = body.diffs.get(key, [])
            if diffs:
                peak = SYM_ZERO
                for d in diffs:
                    peak = sym_max(peak, d)
                if not peak.is_zero() or peak.flags:
                    total = add(total, max_over(peak, space, context))
            escs = body.escs.get(key, [])
            if escs:
                esc_sum = SYM_ZERO
                for e in escs:
                    esc_sum = add(esc_sum, e)
                total = add(total, summed(esc_sum))
            if extra:
                total = total.with_flags(*extra)
            acc.add_own(key, total)

        for (t, key), e in body.esc_tags.items():
            out = summed(e)
            if extra:
                out = out.with_flags(*extra)
            acc.add_tag(t, key, out)

    def _header_inside_space(self, s: ForStmt, space: IterSpace,
                             context, loop_vars) -> bool:
        """Grid check: every index the header produces satisfies the space."""
        lo = expr_poly(s.lo, self.entry | set(loop_vars))
        hi = expr_poly(s.hi, self.entry | set(loop_vars))
        if lo is None or hi is None:
            return False
        names = sorted(
            set(loop_vars) | {v for c in context for v in c.variables()}
            | lo.variables() | hi.variables()
            | {v for c in space.constraints for v in c.variables() if v != s.var})
        names = [n for n in names if n != s.var]
        g = self.grid
        span = g.hi - g.lo + 1
        if names and span ** len(names) > g.max_points:
            return False
        for point in itertools.product(range(g.lo, g.hi + 1), repeat=len(names)):
            env = dict(zip(names, point))
            if not all(c.holds(env) for c in context):
                continue
            lo_v, hi_v = lo.eval(env), hi.eval(env)
            i = lo_v
            while i <= hi_v:
                env_i = dict(env)
                env_i[s.var] = i
                if not all(c.holds(env_i) for c in space.constraints):
                    return False
                i += 1
        return True

    def _method_of(self, qname: str) -> MethodDecl:
        cls_name, _, name = qname.partition(".")
        for m in self.class_map[cls_name].methods:
            if m.name == name:
                return m
        raise MissingCalleeContract(qname)

    # -- top level ----------------------------------------------------------------

    def run(self) -> ConsumptionSummary:
        acc = self.scope(self.m.body, self.requires, ())
        mem_req: dict[str, SymExpr] = {}
        call_part: dict[str, SymExpr] = {}
        for key in sorted(acc.keys()):
            total = acc.own.get(key, SYM_ZERO)
            part = SYM_ZERO
            diffs = acc.diffs.get(key, [])
            if diffs:
                peak = SYM_ZERO
                for d in diffs:
                    peak = sym_max(peak, d)
                part = add(part, peak)
            for e in acc.escs.get(key, []):
                part = add(part, e)
            if diffs or acc.escs.get(key):
                call_part[key] = part
                total = add(total, part)
            if not total.is_zero() or total.flags:
                mem_req[key] = total
        esc = {k: e for k, e in acc.esc_tags.items() if not e.is_zero() or e.flags}
        return ConsumptionSummary(self.m.qname, mem_req, esc, call_part)


def summarize(method: MethodDecl, contracts: dict[str, MethodContract],
              mode: str = MODE_TYPE, class_map: dict[str, ClassDecl] | None = None,
              grid: GridConfig = GridConfig()) -> ConsumptionSummary:
    assert class_map is not None, "resolved class map required"
    return _Summarizer(method, contracts, mode, class_map, grid).run()


# ------------------------------------------------------------------ checking


@dataclass
class ClauseRow:
    method: str
    clause: str
    declared: str | None
    computed: str | None
    verdict: Verdict
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        out = {
            "method": self.method,
            "clause": self.clause,
            "declared": self.declared,
            "computed": self.computed,
        }
        out.update(self.verdict.to_json())
        if self.notes:
            out["notes"] = list(self.notes)
        return out


@dataclass
class Report:
    rows: list[ClauseRow]
    overall: str

    def to_json(self) -> dict:
        return {"overall": self.overall,
                "clauses": [r.to_json() for r in self.rows]}

    def exit_code(self) -> int:
        if any(r.verdict.kind == VerdictKind.VIOLATED for r in self.rows):
            return 1
        if any(r.verdict.kind == VerdictKind.UNVERIFIED for r in self.rows):
            return 2
        return 0


def _declared_bounds(contract: MethodContract, mode: str):
    """Declared clauses, collapsed to the object pseudo-class on demand."""
    if mode != MODE_OBJECT:
        return dict(contract.mem_req), dict(contract.esc)
    keys = _contract_keys(contract)
    if OBJECT_KEY in keys:
        mem = {OBJECT_KEY: contract.mem_req[OBJECT_KEY]} \
            if OBJECT_KEY in contract.mem_req else {}
        esc = {(t, OBJECT_KEY): e for (t, k), e in contract.esc.items()
               if k == OBJECT_KEY}
        return mem, esc
    mem: dict[str, SymExpr] = {}
    total = None
    for e in contract.mem_req.values():
        total = e if total is None else add(total, e)
    if total is not None:
        mem[OBJECT_KEY] = total
    esc: dict[tuple[Tag, str], SymExpr] = {}
    for (t, _), e in contract.esc.items():
        k = (t, OBJECT_KEY)
        esc[k] = add(esc[k], e) if k in esc else e
    return mem, esc


def check_method(method: MethodDecl, summary: ConsumptionSummary,
                 grid: GridConfig = GridConfig(), mode: str = MODE_TYPE,
                 assume_guarantee: bool = False) -> list[ClauseRow]:
    contract = method.contract
    pre = contract.requires
    rows: list[ClauseRow] = []
    declared_mem, declared_esc = _declared_bounds(contract, mode)

    def verdict_for(computed: SymExpr, declared: SymExpr) -> tuple[Verdict, list[str]]:
        notes = []
        if assume_guarantee:
            notes.append("assume-guarantee: recursive calls use their declared contracts")
        if computed.flags:
            return Verdict.unverified(
                "analysis incomplete: " + ", ".join(sorted(computed.flags))), notes
        if not integer_valued_on_grid(declared, grid):
            return Verdict.unverified(
                "declared bound is not integer-valued on the grid"), notes
        try:
            v = entails_leq(computed, declared, pre, grid)
        except GridTooLarge as exc:
            return Verdict.unverified(f"grid too large: {exc}"), notes
        if v.kind == VerdictKind.VERIFIED and computed.is_zero():
            notes.append("trivially satisfied: nothing of this class is consumed")
        return v, notes

    for key, declared in declared_mem.items():
        computed = summary.mem_req.get(key, SYM_ZERO)
        v, notes = verdict_for(computed, declared)
        rows.append(ClauseRow(method.qname, f"memreq<{key}>",
                              str(declared), str(computed), v, notes))
    for (tag, key), declared in declared_esc.items():
        computed = summary.esc.get((tag, key), SYM_ZERO)
        v, notes = verdict_for(computed, declared)
        rows.append(ClauseRow(method.qname, f"esc<{key}>({tag.source_str()})",
                              str(declared), str(computed), v, notes))

    def undeclared(clause: str, computed: SymExpr, note: str) -> ClauseRow:
        # an absent clause declares zero; a positive witness is a violation
        if computed.flags:
            v = Verdict.unverified(
                "analysis incomplete: " + ", ".join(sorted(computed.flags)))
        else:
            try:
                v = entails_leq(computed, SYM_ZERO, pre, grid)
            except GridTooLarge as exc:
                v = Verdict.unverified(f"grid too large: {exc}")
        return ClauseRow(method.qname, clause, None, str(computed), v, [note])

    for key in sorted(summary.mem_req):
        if key in declared_mem:
            continue
        rows.append(undeclared(
            f"memreq<{key}>", summary.mem_req[key],
            f"undeclared consumption: objects of {key} are consumed "
            "but no bound is declared"))
    for (tag, key) in sorted(summary.esc, key=lambda k: (str(k[0]), k[1])):
        if (tag, key) in declared_esc:
            continue
        rows.append(undeclared(
            f"esc<{key}>({tag.source_str()})", summary.esc[(tag, key)],
            f"undeclared escape: objects of {key} escape under "
            f"{tag} without a declared bound"))
    return rows


_LIFETIME_BAD = {escape.TAG_MISMATCH, escape.ESCAPES_UNANNOTATED,
                 escape.ANNOTATED_CAPTURED}


def lifetime_rows(verdicts: list[escape.LifetimeVerdict]) -> list[ClauseRow]:
    rows = []
    for v in verdicts:
        if v.kind in _LIFETIME_BAD:
            rows.append(ClauseRow(
                v.method, f"lifetime({v.where})", None, v.kind,
                Verdict(VerdictKind.VIOLATED, reason=v.kind),
                [v.note] if v.note else []))
        elif v.kind == escape.SUPPRESSED:
            rows.append(ClauseRow(
                v.method, f"lifetime({v.where})", None, v.kind,
                Verdict.verified("suppressed"),
                ["escape check disabled by dest_local at this site"]))
    return rows


def check_program(program: Program, mode: str = MODE_TYPE,
                  grid: GridConfig = GridConfig()) -> Report:
    class_map = program.class_map()
    methods = {m.qname: m for m in program.methods()}
    contracts = {q: m.contract for q, m in methods.items()}

    edges = callgraph.call_edges(program)
    recursive: set[str] = set()
    for comp in callgraph.sccs(program):
        if callgraph.is_recursive(comp, edges):
            missing = [q for q in comp if not contracts[q].has_clauses()]
            if missing:
                raise CyclicWithoutContract(comp, missing)
            recursive |= set(comp)

    analysis = escape.analyze(program)

    rows: list[ClauseRow] = []
    for qname in sorted(methods):
        m = methods[qname]
        s = summarize(m, contracts, mode, class_map, grid)
        rows.extend(check_method(m, s, grid, mode,
                                 assume_guarantee=qname in recursive))
        rows.extend(lifetime_rows(analysis.lifetimes[qname]))

    worst = VerdictKind.VERIFIED
    for r in rows:
        if r.verdict.kind == VerdictKind.VIOLATED:
            worst = VerdictKind.VIOLATED
            break
        if r.verdict.kind == VerdictKind.UNVERIFIED:
            worst = VerdictKind.UNVERIFIED
    return Report(rows, worst)
