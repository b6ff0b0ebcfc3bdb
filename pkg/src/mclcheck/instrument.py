"""Source-to-source counter instrumentation.

Each contract clause becomes an `ensure` over an integer counter that the
rewritten body keeps up to date: requirement counters are bumped before
every allocation, call sites charge the callee's declared footprint
through a max/sum counter pair, and escape counters track tagged objects
as they are produced or pulled in from callees.  Everything inserted is
plain MCL, so the result pretty-prints, reparses, and runs unchanged
through the interpreter; `erase` strips the additions and returns the
original program.

Counter scoping mirrors the worked examples: one maxCalls/sumCalls pair
per class at method level, declared just before the first contributing
call, plus one maxCall/sumCall pair per loop body, declared before the
loop and flushed into the requirement counter right after it (and before
any return that leaves the loop).  A method whose own contract uses the
object pseudo-class collapses every callee contribution onto it.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from .frontend.syntax import (
    Assign,
    AugAssign,
    Binary,
    BindEscStmt,
    CallStmt,
    ClassDecl,
    EnsureStmt,
    EscStmt,
    Expr,
    FieldRef,
    ForStmt,
    IfStmt,
    IntLit,
    LengthRef,
    LocalDecl,
    MaxExpr,
    MemReqStmt,
    MethodContract,
    MethodDecl,
    NewStmt,
    ParenExpr,
    Program,
    RequiresStmt,
    ReturnStmt,
    Stmt,
    T_INT,
    Tag,
    ThisRef,
    Unary,
    VarRef,
)
from .summary import (
    OBJECT_KEY,
    collapsed_contract,
    contract_binding,
    entry_vars,
    ordered_contract_keys,
)
from .symexpr import Poly, SYM_ZERO, SymExpr, add, substitute

_CONTRACT_PREFIX = (RequiresStmt, MemReqStmt, EscStmt, BindEscStmt)

KIND_MEMREQ = "MemReq"
KIND_ESC = "Esc"
KIND_MAXCALLS = "MaxCalls"
KIND_SUMCALLS = "SumCalls"
KIND_CALLDIFF = "CallDiff"


@dataclass(frozen=True)
class CounterInfo:
    method: str  # qualified name
    kind: str
    cls: str
    tag: str | None = None   # Esc counters
    site: str | None = None  # CallDiff counters


@dataclass
class InstrumentedProgram:
    program: Program
    counter_index: dict[str, CounterInfo] = field(default_factory=dict)


# ------------------------------------------------ polynomials back to syntax


def _var_expr(name: str) -> Expr:
    if name.startswith("this."):
        rest = name[len("this."):]
        if rest.endswith(".length"):
            return LengthRef(FieldRef(ThisRef(), rest[: -len(".length")]))
        return FieldRef(ThisRef(), rest)
    if name.endswith(".length"):
        return LengthRef(VarRef(name[: -len(".length")]))
    return VarRef(name)


def _mono_expr(mono) -> Expr:
    node: Expr | None = None
    for var, exp in mono:
        for _ in range(exp):
            factor = _var_expr(var)
            node = factor if node is None else Binary("*", node, factor)
    assert node is not None
    return node


def _int_poly_expr(p: Poly) -> Expr:
    if p.is_zero():
        return IntLit(0)
    node: Expr | None = None
    for mono, c in sorted(p.terms, key=lambda t: (-sum(e for _, e in t[0]), t[0])):
        mag = int(abs(c))
        if not mono:
            body: Expr = IntLit(mag)
        elif mag == 1:
            body = _mono_expr(mono)
        else:
            body = Binary("*", IntLit(mag), _mono_expr(mono))
        if node is None:
            node = body if c > 0 else Unary("-", body)
        else:
            node = Binary("+" if c > 0 else "-", node, body)
    return node


def poly_expr(p: Poly) -> Expr:
    """Render a polynomial as surface syntax, rationals as (...)/d."""
    denom = 1
    for _, c in p.terms:
        g, b = denom, c.denominator
        while b:
            g, b = b, g % b
        denom = denom * c.denominator // g
    if denom == 1:
        return _int_poly_expr(p)
    return Binary("/", ParenExpr(_int_poly_expr(p.scale(denom))), IntLit(denom))


def sym_expr_node(e: SymExpr) -> Expr:
    node = poly_expr(e.alts[0])
    for p in e.alts[1:]:
        node = MaxExpr(node, poly_expr(p))
    return node


def _operand(e: Expr) -> Expr:
    # keep subtraction unambiguous: (n + 1) - 1, but plain n - 2
    if isinstance(e, (Binary, MaxExpr)):
        return ParenExpr(e)
    return e


def _suffix(key: str) -> str:
    return key[:-2] + "_arr" if key.endswith("[]") else key


# ------------------------------------------------------------- per method


class _Scope:
    """One level of maxCalls/sumCalls pairs (method body or a loop body)."""

    def __init__(self):
        self.pairs: dict[str, tuple[str, str]] = {}


class _Instrumenter:
    def __init__(self, method: MethodDecl, cls: ClassDecl,
                 methods: dict[str, MethodDecl], class_map: dict[str, ClassDecl],
                 index: dict[str, CounterInfo]):
        self.m = method
        self.cls = cls
        self.methods = methods
        self.class_map = class_map
        self.index = index
        self.prefix = method.name
        self.entry = entry_vars(method, cls)
        self.object_mode = OBJECT_KEY in ordered_contract_keys(method.contract)
        self.inits: dict[str, CounterInfo] = {}
        self.diff_total: dict[str, int] = {}
        self.diff_seen: dict[str, int] = {}
        self.loop_pair_seen: dict[str, int] = {}

    # -- naming ------------------------------------------------------------

    def _memreq(self, key: str) -> str:
        name = f"{self.prefix}_MemReq_{_suffix(key)}"
        self.inits.setdefault(name, CounterInfo(self.m.qname, KIND_MEMREQ, key))
        return name

    def _esc(self, tag: Tag, key: str) -> str:
        name = f"{self.prefix}_Esc_{tag.counter_str()}_{_suffix(key)}"
        self.inits.setdefault(
            name, CounterInfo(self.m.qname, KIND_ESC, key, tag=tag.counter_str()))
        return name

    def _diff(self, key: str, site: str) -> str:
        self.diff_seen[key] = self.diff_seen.get(key, 0) + 1
        k = self.diff_seen[key]
        name = (f"call{k}_diff_{_suffix(key)}" if self.diff_total[key] > 1
                else f"call_diff_{_suffix(key)}")
        self.index[name] = CounterInfo(self.m.qname, KIND_CALLDIFF, key, site=site)
        return name

    # -- callee contract shaping --------------------------------------------

    def _callee(self, stmt: NewStmt | CallStmt) -> MethodDecl | None:
        if isinstance(stmt, CallStmt):
            return self.methods.get(stmt.resolved) if stmt.resolved else None
        if stmt.class_ref.is_array:
            return None
        cls = self.class_map.get(stmt.class_ref.name)
        return cls.ctor() if cls else None

    def _call_entries(self, callee: MethodDecl, receiver, args, is_ctor):
        """(key, MR, esc-by-tag) per class, caller-mode collapsed."""
        contract = callee.contract
        binding, _ = contract_binding(callee, contract, receiver, args,
                                      self.entry | self.loop_vars, is_ctor)
        if self.object_mode:
            mr, esc_by_tag = collapsed_contract(contract, binding)
            return [(OBJECT_KEY, mr, esc_by_tag)]
        entries = []
        for key in ordered_contract_keys(contract):
            mr = substitute(contract.mem_req.get(key, SYM_ZERO), binding)
            esc_by_tag = {t: substitute(e, binding)
                          for (t, k), e in contract.esc.items() if k == key}
            entries.append((key, mr, esc_by_tag))
        return entries

    def _contributing(self, stmts: list[Stmt]) -> list[str]:
        """Classes charged by calls at this nesting level, loops excluded."""
        keys: list[str] = []

        def visit(body):
            for s in body:
                if isinstance(s, (NewStmt, CallStmt)):
                    callee = self._callee(s)
                    if callee is not None and callee.contract.has_clauses():
                        if self.object_mode:
                            found = [OBJECT_KEY]
                        else:
                            found = ordered_contract_keys(callee.contract)
                        for k in found:
                            if k not in keys:
                                keys.append(k)
                elif isinstance(s, IfStmt):
                    visit(s.then_body)
                    visit(s.else_body)

        visit(stmts)
        return keys

    def _count_diffs(self, stmts: list[Stmt]) -> None:
        for s in stmts:
            if isinstance(s, (NewStmt, CallStmt)):
                callee = self._callee(s)
                if callee is not None and callee.contract.has_clauses():
                    keys = ([OBJECT_KEY] if self.object_mode
                            else ordered_contract_keys(callee.contract))
                    for k in keys:
                        self.diff_total[k] = self.diff_total.get(k, 0) + 1
            elif isinstance(s, IfStmt):
                self._count_diffs(s.then_body)
                self._count_diffs(s.else_body)
            elif isinstance(s, ForStmt):
                self._count_diffs(s.body)

    # -- statement rewriting --------------------------------------------------

    def _call_counters(self, stmt: NewStmt | CallStmt, scope: _Scope) -> list[Stmt]:
        callee = self._callee(stmt)
        if callee is None or not callee.contract.has_clauses():
            return []
        is_ctor = isinstance(stmt, NewStmt)
        receiver = None if is_ctor else stmt.receiver
        site = stmt.site
        out: list[Stmt] = []
        for key, mr, esc_by_tag in self._call_entries(
                callee, receiver, stmt.args, is_ctor):
            total = SYM_ZERO
            for e in esc_by_tag.values():
                total = add(total, e)
            max_name, sum_name = scope.pairs[key]
            diff = self._diff(key, site)
            out.append(LocalDecl(T_INT, diff, Binary(
                "-", _operand(sym_expr_node(mr)), _operand(sym_expr_node(total)))))
            out.append(Assign(VarRef(max_name),
                              MaxExpr(VarRef(max_name), VarRef(diff))))
            out.append(AugAssign(VarRef(sum_name), sym_expr_node(total)))
            for dst, src in stmt.add_esc:
                pulled = esc_by_tag.get(src)
                if pulled is not None:
                    out.append(AugAssign(VarRef(self._esc(dst, key)),
                                         sym_expr_node(pulled)))
        return out

    def _new_counters(self, s: NewStmt) -> list[Stmt]:
        key = OBJECT_KEY if self.object_mode else s.class_ref.key()
        amount: Expr = s.length if s.class_ref.is_array else IntLit(1)
        out: list[Stmt] = [AugAssign(VarRef(self._memreq(key)), copy.deepcopy(amount))]
        if s.dest_esc is not None:
            out.append(AugAssign(VarRef(self._esc(s.dest_esc, key)),
                                 copy.deepcopy(amount)))
        return out

    def _declare_pair(self, key: str, scope: _Scope, in_loop: bool) -> list[Stmt]:
        if in_loop:
            self.loop_pair_seen[key] = self.loop_pair_seen.get(key, 0) + 1
            k = self.loop_pair_seen[key]
            n = "" if k == 1 else str(k)
            max_name, sum_name = f"maxCall{n}_{_suffix(key)}", f"sumCall{n}_{_suffix(key)}"
        else:
            max_name, sum_name = f"maxCalls_{_suffix(key)}", f"sumCalls_{_suffix(key)}"
        self.index[max_name] = CounterInfo(self.m.qname, KIND_MAXCALLS, key)
        self.index[sum_name] = CounterInfo(self.m.qname, KIND_SUMCALLS, key)
        scope.pairs[key] = (max_name, sum_name)
        return [LocalDecl(T_INT, max_name, IntLit(0)),
                LocalDecl(T_INT, sum_name, IntLit(0))]

    def _flush(self, scope: _Scope) -> list[Stmt]:
        return [AugAssign(VarRef(self._memreq(key)),
                          Binary("+", VarRef(mx), VarRef(sm)))
                for key, (mx, sm) in scope.pairs.items()]

    def _flush_all(self, scopes: list[_Scope]) -> list[Stmt]:
        out: list[Stmt] = []
        for scope in reversed(scopes):  # innermost loop first, method last
            out.extend(self._flush(scope))
        return out

    def _rewrite(self, stmts: list[Stmt], scopes: list[_Scope]) -> list[Stmt]:
        method_scope = scopes[0]
        out: list[Stmt] = []
        for s in stmts:
            if isinstance(s, ReturnStmt):
                out.extend(self._flush_all(scopes))
                out.append(s)
            elif isinstance(s, (NewStmt, CallStmt)):
                if len(scopes) == 1:  # method level declares pairs lazily
                    for key in self._contributing([s]):
                        if key not in method_scope.pairs:
                            out.extend(self._declare_pair(
                                key, method_scope, in_loop=False))
                out.extend(self._call_counters(s, scopes[-1]))
                if isinstance(s, NewStmt):
                    out.extend(self._new_counters(s))
                out.append(s)
            elif isinstance(s, IfStmt):
                if len(scopes) == 1:
                    # hoist pair declarations so both arms share them
                    for key in self._contributing([s]):
                        if key not in method_scope.pairs:
                            out.extend(self._declare_pair(
                                key, method_scope, in_loop=False))
                s.then_body = self._rewrite(s.then_body, scopes)
                s.else_body = self._rewrite(s.else_body, scopes)
                out.append(s)
            elif isinstance(s, ForStmt):
                loop_scope = _Scope()
                decls: list[Stmt] = []
                for key in self._contributing(s.body):
                    decls.extend(self._declare_pair(key, loop_scope, in_loop=True))
                saved = self.loop_vars
                self.loop_vars = saved | {s.var}
                s.body = self._rewrite(s.body, scopes + [loop_scope])
                self.loop_vars = saved
                out.extend(decls)
                out.append(s)
                out.extend(self._flush(loop_scope))
            else:
                out.append(s)
        return out

    # -- assembly ---------------------------------------------------------------

    def run(self) -> None:
        contract = self.m.contract
        self.loop_vars: set[str] = set()
        self._count_diffs(self.m.body)

        split = 0
        while split < len(self.m.body) and isinstance(self.m.body[split],
                                                      _CONTRACT_PREFIX):
            split += 1
        prefix, rest = self.m.body[:split], self.m.body[split:]

        # build ensures first so contract counters lead the init order
        ensures: list[Stmt] = []
        for key, bound in contract.mem_req.items():
            ensures.append(EnsureStmt(Binary(
                "<=", VarRef(self._memreq(key)), sym_expr_node(bound))))
        for (tag, key), bound in contract.esc.items():
            ensures.append(EnsureStmt(Binary(
                "<=", VarRef(self._esc(tag, key)), sym_expr_node(bound))))

        method_scope = _Scope()
        body = self._rewrite(rest, [method_scope])
        # _rewrite flushes before each return; a body that falls off the
        # end (void methods, ctors) still needs the trailing accumulation
        if method_scope.pairs and (
                not body or not isinstance(body[-1], ReturnStmt)):
            body = body + self._flush(method_scope)

        if ensures or self.inits:
            self.m.body = prefix + ensures + self._init_decls() + body
        else:
            self.m.body = prefix + body
        for name, info in self.inits.items():
            self.index[name] = info

    def _init_decls(self) -> list[Stmt]:
        return [LocalDecl(T_INT, name, IntLit(0)) for name in self.inits]


# ------------------------------------------------------------------- entry


def instrument(program: Program) -> InstrumentedProgram:
    """Rewrite a resolved program with counters and runtime assertions.

    The input is left untouched; the returned copy keeps all resolution
    results (call targets, allocation sites, loop spaces), so it can be
    interpreted or pretty-printed directly.
    """
    prog = copy.deepcopy(program)
    index: dict[str, CounterInfo] = {}
    class_map = prog.class_map()
    methods = {m.qname: m for m in prog.methods()}
    for m in prog.methods():
        _Instrumenter(m, class_map[m.cls], methods, class_map, index).run()
    return InstrumentedProgram(prog, index)


def _strip(stmts: list[Stmt], names: set[str]) -> list[Stmt]:
    out: list[Stmt] = []
    for s in stmts:
        if isinstance(s, EnsureStmt):
            continue
        if isinstance(s, LocalDecl) and s.name in names:
            continue
        if isinstance(s, (Assign, AugAssign)) and \
                isinstance(s.target, VarRef) and s.target.name in names:
            continue
        if isinstance(s, IfStmt):
            s.then_body = _strip(s.then_body, names)
            s.else_body = _strip(s.else_body, names)
        elif isinstance(s, ForStmt):
            s.body = _strip(s.body, names)
        out.append(s)
    return out


def erase(inst: InstrumentedProgram) -> Program:
    """Undo instrument: drop ensures and every statement touching a counter.

    Counter names are treated as a reserved namespace; a source program
    that already uses them is outside this transform's domain.
    """
    prog = copy.deepcopy(inst.program)
    names = set(inst.counter_index)
    for m in prog.methods():
        m.body = _strip(m.body, names)
    return prog
