"""Name/type resolution, contract extraction, and structural lints.

Resolution is flow-insensitive: every method gets one symbol table built
from its parameters and all declarations anywhere in its body.  That is
enough for receiver typing because call results must be bound through a
declaring statement, and it keeps instrumented output (whose counters are
declared mid-body but ensured at the top) resolvable without special
cases.
"""

from __future__ import annotations

from fractions import Fraction

from ..symexpr import (
    IterSpace, LinConstraint, Poly, SymExpr, add, sym_max,
)
from .diagnostics import Diagnostic, ResolveFailure, SEV_ERROR, SEV_WARNING
from .syntax import (
    AddEscStmt, Assign, AugAssign, Binary, BindEscStmt, BoolLit, CallStmt,
    ClassDecl, Cmp, DestEscStmt, DestLocalStmt, EnsureStmt, EscStmt, Expr,
    FieldRef, ForStmt, IfStmt, IndexRef, IntLit, IterationSpaceStmt,
    LengthRef, LocalDecl, MaxExpr, MemReqStmt, MethodContract, MethodDecl,
    NewStmt, NullLit, NOPOS, OutArg, ParenExpr, Pos, PRIMITIVES, Program,
    RequiresStmt, ReturnStmt, StrLit, Stmt, Tag, ThisRef, TypeRef, Unary,
    VarRef,
)

_CONTRACT_STMTS = (RequiresStmt, MemReqStmt, EscStmt, BindEscStmt)


def _contains_max(e: Expr) -> bool:
    if isinstance(e, MaxExpr):
        return True
    if isinstance(e, ParenExpr):
        return _contains_max(e.inner)
    if isinstance(e, Binary):
        return _contains_max(e.left) or _contains_max(e.right)
    if isinstance(e, Unary):
        return _contains_max(e.operand)
    return False


class _Resolver:
    def __init__(self, program: Program):
        self.program = program
        self.diags: list[Diagnostic] = []
        self.classes: dict[str, ClassDecl] = {}
        self.next_site_id = 1

    # -- diagnostics ---------------------------------------------------------

    def error(self, code: str, message: str, pos: Pos = NOPOS) -> None:
        self.diags.append(Diagnostic(SEV_ERROR, code, message,
                                     self.program.source_name, pos.line, pos.col))

    def warn(self, code: str, message: str, pos: Pos = NOPOS) -> None:
        self.diags.append(Diagnostic(SEV_WARNING, code, message,
                                     self.program.source_name, pos.line, pos.col))

    # -- top level -----------------------------------------------------------

    def run(self) -> list[Diagnostic]:
        for c in self.program.classes:
            if c.name in self.classes:
                self.error("duplicate-class", f"class {c.name} is declared twice", c.pos)
            self.classes[c.name] = c
        for c in self.program.classes:
            self.check_class(c)
        for c in self.program.classes:
            for m in c.methods:
                _MethodResolver(self, c, m).run()
        if any(d.severity == SEV_ERROR for d in self.diags):
            raise ResolveFailure(self.diags)
        self.program.resolved = True
        return self.diags

    def check_class(self, c: ClassDecl) -> None:
        seen_fields: set[str] = set()
        for f in c.fields:
            if f.name in seen_fields:
                self.error("duplicate-field", f"field {c.name}.{f.name} is declared twice", f.pos)
            seen_fields.add(f.name)
            self.check_type(f.decl_type, f.pos)
        seen_methods: set[str] = set()
        ctors = 0
        for m in c.methods:
            if m.name in seen_methods:
                self.error("duplicate-method", f"method {c.name}.{m.name} is declared twice", m.pos)
            seen_methods.add(m.name)
            if m.is_ctor:
                ctors += 1
        if ctors > 1:
            self.error("duplicate-method", f"class {c.name} has more than one constructor", c.pos)

    def check_type(self, t: TypeRef, pos: Pos) -> None:
        if t.name not in PRIMITIVES and t.name not in self.classes:
            self.error("unknown-type", f"unknown type {t}", pos)

    def is_reference(self, t: TypeRef) -> bool:
        return t.is_array or (t.name in self.classes)

    def lookup_method(self, cls_name: str, method: str) -> MethodDecl | None:
        c = self.classes.get(cls_name)
        if c is None:
            return None
        for m in c.methods:
            if m.name == method:
                return m
        return None


class _MethodResolver:
    def __init__(self, top: _Resolver, cls: ClassDecl, method: MethodDecl):
        self.top = top
        self.cls = cls
        self.m = method
        self.vars: dict[str, TypeRef] = {}
        self.out_params: set[str] = set()
        self.loop_vars: set[str] = set()
        self.assigned: set[str] = set()
        self.contract = MethodContract()
        self.new_ordinal = 0
        self.call_ordinal = 0

    def error(self, code: str, msg: str, pos: Pos = NOPOS) -> None:
        self.top.error(code, f"{self.m.qname}: {msg}", pos)

    def warn(self, code: str, msg: str, pos: Pos = NOPOS) -> None:
        self.top.warn(code, f"{self.m.qname}: {msg}", pos)

    def run(self) -> None:
        self.m.cls = self.cls.name
        if not self.m.is_ctor:
            self.top.check_type(self.m.return_type, self.m.pos)
        for p in self.m.params:
            self.top.check_type(p.decl_type, p.pos)
            if p.name in self.vars:
                self.error("duplicate-param", f"parameter {p.name} is declared twice", p.pos)
            self.vars[p.name] = p.decl_type
            if p.is_out:
                self.out_params.add(p.name)
        self.collect_decls(self.m.body)
        self.extract_contract()
        self.resolve_block(self.m.body, enclosing_loops=(), nested=False)
        self.m.contract = self.contract
        for p in self.m.params:
            if p.is_out and p.name not in self.assigned:
                self.error("out-never-assigned", f"out parameter {p.name} is never assigned", p.pos)
        if (not self.m.is_ctor and self.m.return_type.key() != "void"
                and not self.always_returns(self.m.body)):
            self.error("missing-return", "control may reach the end without returning a value",
                       self.m.pos)

    # -- symbol table ---------------------------------------------------------

    def declare(self, name: str, t: TypeRef, pos: Pos, loop_var: bool = False) -> None:
        if loop_var:
            prev = self.vars.get(name)
            if prev is not None and prev.key() != "int":
                self.error("duplicate-local", f"loop variable {name} shadows a non-int name", pos)
            self.vars[name] = TypeRef("int")
            self.loop_vars.add(name)
            return
        if name in self.vars:
            self.error("duplicate-local", f"{name} is declared twice", pos)
        self.top.check_type(t, pos)
        self.vars[name] = t

    def collect_decls(self, body: list[Stmt]) -> None:
        for s in body:
            if isinstance(s, LocalDecl):
                self.declare(s.name, s.decl_type, s.pos)
            elif isinstance(s, (NewStmt, CallStmt)) and s.decl_type is not None:
                if isinstance(s.target, VarRef):
                    self.declare(s.target.name, s.decl_type, s.pos)
                else:
                    self.error("bad-decl", "a declaring statement must bind a plain name", s.pos)
            elif isinstance(s, IfStmt):
                self.collect_decls(s.then_body)
                self.collect_decls(s.else_body)
            elif isinstance(s, ForStmt):
                self.declare(s.var, TypeRef("int"), s.pos, loop_var=True)
                self.collect_decls(s.body)

    # -- contract extraction ---------------------------------------------------

    def contract_vars(self) -> set[str]:
        """Names a contract expression may mention, all fixed at entry."""
        names: set[str] = set()
        for p in self.m.params:
            if p.is_out:
                continue
            if p.decl_type.key() == "int":
                names.add(p.name)
            elif p.decl_type.is_array:
                names.add(f"{p.name}.length")
        for f in self.cls.fields:
            if f.decl_type.key() == "int":
                names.add(f"this.{f.name}")
            elif f.decl_type.is_array:
                names.add(f"this.{f.name}.length")
        return names

    def poly_of(self, e: Expr, extra: set[str], what: str) -> Poly | None:
        admissible = self.contract_vars() | extra

        def rec(e: Expr) -> Poly | None:
            if isinstance(e, ParenExpr):
                return rec(e.inner)
            if isinstance(e, IntLit):
                return Poly.const(e.value)
            if isinstance(e, VarRef):
                if e.name in admissible:
                    return Poly.var(e.name)
                self.error("bad-contract-expr",
                           f"{what} may not mention {e.name}; only entry-constant "
                           "integers are allowed", e.pos)
                return None
            if isinstance(e, FieldRef) and isinstance(e.base, ThisRef):
                name = f"this.{e.field}"
                if name in admissible:
                    return Poly.var(name)
                self.error("bad-contract-expr", f"{what} may not mention {name}", e.pos)
                return None
            if isinstance(e, LengthRef):
                name = None
                if isinstance(e.base, VarRef):
                    name = f"{e.base.name}.length"
                elif isinstance(e.base, FieldRef) and isinstance(e.base.base, ThisRef):
                    name = f"this.{e.base.field}.length"
                if name in admissible:
                    return Poly.var(name)
                self.error("bad-contract-expr", f"{what} may not take this length", e.pos)
                return None
            if isinstance(e, Unary) and e.op == "-":
                p = rec(e.operand)
                return None if p is None else -p
            if isinstance(e, Binary) and e.op in ("+", "-", "*", "/"):
                a, b = rec(e.left), rec(e.right)
                if a is None or b is None:
                    return None
                if e.op == "+":
                    return a + b
                if e.op == "-":
                    return a - b
                if e.op == "*":
                    return a * b
                if not b.is_const() or b.const_value() == 0:
                    self.error("bad-divisor", f"{what} may only divide by a nonzero constant",
                               e.pos)
                    return None
                return a.scale(Fraction(1, b.const_value()))
            self.error("bad-contract-expr", f"{what} must be a polynomial expression", getattr(e, "pos", NOPOS))
            return None

        return rec(e)

    def symexpr_of(self, e: Expr, what: str) -> SymExpr | None:
        if isinstance(e, ParenExpr):
            return self.symexpr_of(e.inner, what)
        if isinstance(e, MaxExpr):
            a = self.symexpr_of(e.left, what)
            b = self.symexpr_of(e.right, what)
            return None if a is None or b is None else sym_max(a, b)
        if isinstance(e, Binary) and e.op == "+" and _contains_max(e):
            a = self.symexpr_of(e.left, what)
            b = self.symexpr_of(e.right, what)
            return None if a is None or b is None else add(a, b)
        if isinstance(e, Binary) and e.op == "-" and _contains_max(e):
            if _contains_max(e.right):
                self.error("bad-contract-expr", f"{what}: max may not be subtracted", e.pos)
                return None
            a = self.symexpr_of(e.left, what)
            b = self.poly_of(e.right, set(), what)
            return None if a is None or b is None else add(a, SymExpr.of(-b))
        if _contains_max(e):
            self.error("bad-contract-expr", f"{what}: max may only be combined additively", e.pos)
            return None
        p = self.poly_of(e, set(), what)
        return None if p is None else SymExpr.of(p)

    def constraint_of(self, c: Cmp, extra: set[str], what: str) -> LinConstraint | None:
        if c.rel == "!=":
            self.error("requires-neq", f"{what} may not use !=", NOPOS)
            return None
        a = self.poly_of(c.left, extra, what)
        b = self.poly_of(c.right, extra, what)
        if a is None or b is None:
            return None
        return LinConstraint.compare(a, c.rel, b)

    def clause_type(self, t: TypeRef, pos: Pos) -> str | None:
        if t.is_array:
            if t.name in self.top.classes:
                return t.key()
            self.error("unknown-type", f"unknown element class {t.name}", pos)
            return None
        if t.name in self.top.classes or t.name == "object":
            return t.key()
        self.error("unknown-type", f"{t} is not a class", pos)
        return None

    def extract_contract(self) -> None:
        in_prefix = True
        requires: list[LinConstraint] = []
        for s in self.m.body:
            if isinstance(s, EnsureStmt):
                continue  # instrumentation output, contract-neutral
            if not isinstance(s, _CONTRACT_STMTS):
                in_prefix = False
                continue
            if not in_prefix:
                self.error("contract-not-at-entry",
                           "contract clauses must precede the first statement", s.pos)
                continue
            if isinstance(s, RequiresStmt):
                for c in s.constraints:
                    lc = self.constraint_of(c, set(), "requires")
                    if lc is not None:
                        requires.append(lc)
            elif isinstance(s, MemReqStmt):
                key = self.clause_type(s.class_ref, s.pos)
                e = self.symexpr_of(s.expr, "memreq")
                if key is None or e is None:
                    continue
                if key in self.contract.mem_req:
                    self.error("duplicate-clause", f"memreq<{key}> given twice", s.pos)
                self.contract.mem_req[key] = e
            elif isinstance(s, EscStmt):
                key = self.clause_type(s.class_ref, s.pos)
                e = self.symexpr_of(s.expr, "esc")
                if key is None or e is None:
                    continue
                if s.tag.kind == "return" and not (self.m.is_ctor
                                                   or self.top.is_reference(self.m.return_type)):
                    self.error("esc-return-void",
                               "esc on return needs a reference return type", s.pos)
                if (s.tag, key) in self.contract.esc:
                    self.error("duplicate-clause", f"esc<{key}> on {s.tag} given twice", s.pos)
                self.contract.esc[(s.tag, key)] = e
            elif isinstance(s, BindEscStmt):
                if s.tag.kind != "user":
                    self.error("bad-bind-target", "only named tags can be bound", s.pos)
                    continue
                if s.tag in self.contract.bindings:
                    self.error("duplicate-clause", f"tag {s.tag} bound twice", s.pos)
                self.check_bind_path(s)
                self.contract.bindings[s.tag] = s.path
        self.contract.requires = tuple(requires)
        for (tag, key) in self.contract.esc:
            if tag.kind == "user" and tag not in self.contract.bindings:
                self.error("unknown-tag-binding",
                           f"tag {tag} has no bind_esc", self.m.pos)

    def check_bind_path(self, s: BindEscStmt) -> None:
        path = s.path
        if path.root == "this":
            t: TypeRef | None = TypeRef(self.cls.name)
        elif path.root == "return":
            t = self.m.return_type if not self.m.is_ctor else TypeRef(self.cls.name)
        else:
            t = self.vars.get(path.root)
            if t is None or path.root not in {p.name for p in self.m.params}:
                self.error("bad-bind-path", f"{path} must start at a parameter, this, or return",
                           s.pos)
                return
        for f in path.fields:
            if t is None or t.is_array or t.name not in self.top.classes:
                self.error("bad-bind-path", f"{path}: {t} has no fields", s.pos)
                return
            fd = self.top.classes[t.name].field_map().get(f)
            if fd is None:
                self.error("bad-bind-path", f"{path}: {t.name} has no field {f}", s.pos)
                return
            t = fd.decl_type
        if t is not None and not self.top.is_reference(t):
            self.error("bad-bind-path", f"{path} does not name a heap object", s.pos)

    # -- statement resolution ----------------------------------------------------

    def resolve_block(self, body: list[Stmt], enclosing_loops: tuple[str, ...],
                      nested: bool = True) -> None:
        returned = False
        for s in body:
            if returned:
                self.warn("dead-code", "statement is unreachable", getattr(s, "pos", NOPOS))
                returned = False  # one warning per dead region is enough
            self.resolve_stmt(s, enclosing_loops, nested)
            if isinstance(s, ReturnStmt):
                returned = True

    def resolve_stmt(self, s: Stmt, loops: tuple[str, ...], nested: bool = True) -> None:
        if isinstance(s, LocalDecl):
            if s.init is not None:
                self.typeof(s.init)
            self.assigned.add(s.name)
        elif isinstance(s, Assign):
            self.check_lvalue(s.target, loops)
            self.typeof(s.value)
        elif isinstance(s, AugAssign):
            self.check_lvalue(s.target, loops)
            self.typeof(s.value)
        elif isinstance(s, NewStmt):
            self.resolve_new(s, loops)
        elif isinstance(s, CallStmt):
            self.resolve_call(s, loops)
        elif isinstance(s, ReturnStmt):
            if s.value is not None:
                if self.m.is_ctor or self.m.return_type.key() == "void":
                    self.error("bad-return", "this method cannot return a value", s.pos)
                self.typeof(s.value)
            elif not self.m.is_ctor and self.m.return_type.key() != "void":
                self.error("bad-return", "a value must be returned", s.pos)
        elif isinstance(s, IfStmt):
            self.typeof(s.cond)
            self.resolve_block(s.then_body, loops)
            self.resolve_block(s.else_body, loops)
        elif isinstance(s, ForStmt):
            self.resolve_for(s, loops)
        elif isinstance(s, EnsureStmt):
            self.typeof(s.cond)
        elif isinstance(s, _CONTRACT_STMTS):
            if nested:  # top-level occurrences were consumed by extract_contract
                self.error("contract-not-at-entry",
                           "contract clauses must precede the first statement", s.pos)
        elif isinstance(s, (DestEscStmt, DestLocalStmt, AddEscStmt)):
            self.error("misplaced-annotation",
                       "this annotation does not precede an allocation or call",
                       s.pos)
        elif isinstance(s, IterationSpaceStmt):
            self.error("misplaced-annotation",
                       "iteration_space must be the first statement of a loop body", s.pos)

    def check_tag_use(self, tag: Tag, pos: Pos, where: str) -> None:
        if tag.kind == "return":
            if self.m.is_ctor:
                self.error("bad-tag", f"{where}: a constructor has no return value", pos)
            elif not self.top.is_reference(self.m.return_type):
                self.error("bad-tag", f"{where}: return type is not a reference", pos)
        elif tag.kind == "user" and tag not in self.contract.bindings:
            self.error("unknown-tag-binding", f"{where}: tag {tag} has no bind_esc", pos)

    def resolve_new(self, s: NewStmt, loops: tuple[str, ...]) -> None:
        self.new_ordinal += 1
        s.site = f"{self.m.qname}#{self.new_ordinal}"
        s.site_id = self.top.next_site_id
        self.top.next_site_id += 1
        if s.class_ref.name not in self.top.classes:
            self.error("unknown-type", f"cannot allocate unknown class {s.class_ref.name}", s.pos)
            return
        if s.class_ref.is_array:
            self.typeof(s.length)
        else:
            ctor = self.top.classes[s.class_ref.name].ctor()
            want = len(ctor.params) if ctor else 0
            if len(s.args) != want:
                self.error("ctor-arity",
                           f"{s.class_ref.name} constructor takes {want} argument(s), "
                           f"got {len(s.args)}", s.pos)
            for a in s.args:
                self.typeof(a)
        if s.dest_esc is not None:
            self.check_tag_use(s.dest_esc, s.pos, "dest_esc")
        if s.dest_esc is not None and s.dest_local:
            self.error("bad-tag", "dest_esc and dest_local on the same allocation", s.pos)
        for dst, _src in s.add_esc:
            self.check_tag_use(dst, s.pos, "add_esc")
        self.bind_target(s.target, s.decl_type, loops)

    def resolve_call(self, s: CallStmt, loops: tuple[str, ...]) -> None:
        self.call_ordinal += 1
        s.site = f"{self.m.qname}@{self.call_ordinal}"
        if s.receiver is None:
            cls_name = self.cls.name
        else:
            rt = self.typeof(s.receiver)
            if rt is None:
                return
            if rt.is_array or rt.name not in self.top.classes:
                self.error("not-a-class", f"cannot call a method on {rt}", s.pos)
                return
            cls_name = rt.name
        callee = self.top.lookup_method(cls_name, s.method)
        if callee is None or callee.is_ctor:
            self.error("unknown-method", f"{cls_name} has no method {s.method}", s.pos)
            return
        s.resolved = f"{cls_name}.{s.method}"
        if len(s.args) != len(callee.params):
            self.error("arity", f"{s.resolved} takes {len(callee.params)} argument(s), "
                       f"got {len(s.args)}", s.pos)
        else:
            for a, p in zip(s.args, callee.params):
                if isinstance(a, OutArg) != p.is_out:
                    self.error("out-mismatch",
                               f"argument {p.name} of {s.resolved} must "
                               f"{'be' if p.is_out else 'not be'} passed with out", s.pos)
                if isinstance(a, OutArg):
                    self.check_lvalue(a.target, loops)
                else:
                    self.typeof(a)
        for dst, _src in s.add_esc:
            self.check_tag_use(dst, s.pos, "add_esc")
        if s.target is not None:
            if callee.return_type.key() == "void":
                self.error("bad-return", f"{s.resolved} returns nothing", s.pos)
            self.bind_target(s.target, s.decl_type, loops)

    def bind_target(self, target: Expr, decl_type: TypeRef | None,
                    loops: tuple[str, ...]) -> None:
        if decl_type is None:
            self.check_lvalue(target, loops)
        elif isinstance(target, VarRef):
            self.assigned.add(target.name)

    def resolve_for(self, s: ForStmt, loops: tuple[str, ...]) -> None:
        self.typeof(s.lo)
        self.typeof(s.hi)
        inner = loops + (s.var,)
        if s.space is not None:
            cons = []
            for c in s.space:
                lc = self.constraint_of(c, set(inner), "iteration_space")
                if lc is not None:
                    cons.append(lc)
            s.resolved_space = IterSpace(s.var, tuple(cons))
            if s.var not in {v for lc in cons for v in lc.variables()}:
                self.error("bad-contract-expr",
                           f"iteration_space must constrain {s.var}", s.pos)
        else:
            outer = set(loops)
            lo = self.quiet_poly(s.lo, outer)
            hi = self.quiet_poly(s.hi, outer)
            if lo is not None and hi is not None:
                s.resolved_space = IterSpace.interval_space(s.var, lo, hi)
        self.resolve_block(s.body, inner)

    def quiet_poly(self, e: Expr, extra: set[str]) -> Poly | None:
        """poly_of without diagnostics, for loop headers that may be dynamic."""
        saved = len(self.top.diags)
        p = self.poly_of(e, extra, "loop bound")
        if p is None:
            del self.top.diags[saved:]
        return p

    # -- expressions ---------------------------------------------------------

    def check_lvalue(self, e: Expr, loops: tuple[str, ...]) -> None:
        if isinstance(e, VarRef):
            if e.name in loops:
                self.error("loop-var-assigned", f"loop variable {e.name} may not be assigned",
                           e.pos)
            if e.name not in self.vars:
                self.error("unknown-name", f"unknown name {e.name}", e.pos)
            self.assigned.add(e.name)
            return
        if isinstance(e, (FieldRef, IndexRef)):
            self.typeof(e)
            return
        self.error("bad-lvalue", "cannot assign to this expression", getattr(e, "pos", NOPOS))

    def typeof(self, e: Expr) -> TypeRef | None:
        if isinstance(e, IntLit):
            return TypeRef("int")
        if isinstance(e, BoolLit):
            return TypeRef("bool")
        if isinstance(e, StrLit):
            return TypeRef("string")
        if isinstance(e, NullLit):
            return None
        if isinstance(e, VarRef):
            t = self.vars.get(e.name)
            if t is None:
                self.error("unknown-name", f"unknown name {e.name}", e.pos)
            return t
        if isinstance(e, ThisRef):
            return TypeRef(self.cls.name)
        if isinstance(e, FieldRef):
            bt = self.typeof(e.base)
            if bt is None:
                return None
            if bt.is_array or bt.name not in self.top.classes:
                self.error("unknown-field", f"{bt} has no field {e.field}", e.pos)
                return None
            fd = self.top.classes[bt.name].field_map().get(e.field)
            if fd is None:
                self.error("unknown-field", f"{bt.name} has no field {e.field}", e.pos)
                return None
            return fd.decl_type
        if isinstance(e, LengthRef):
            bt = self.typeof(e.base)
            if bt is not None and not bt.is_array and bt.key() != "string":
                self.error("not-an-array", ".length needs an array or string", e.pos)
            return TypeRef("int")
        if isinstance(e, IndexRef):
            bt = self.typeof(e.base)
            self.typeof(e.index)
            if bt is None:
                return None
            if not bt.is_array:
                self.error("not-an-array", f"cannot index {bt}", e.pos)
                return None
            return bt.element()
        if isinstance(e, Unary):
            self.typeof(e.operand)
            return TypeRef("bool" if e.op == "!" else "int")
        if isinstance(e, Binary):
            self.typeof(e.left)
            self.typeof(e.right)
            if e.op in ("&&", "||", "<", "<=", ">", ">=", "==", "!="):
                return TypeRef("bool")
            return TypeRef("int")
        if isinstance(e, MaxExpr):
            self.typeof(e.left)
            self.typeof(e.right)
            return TypeRef("int")
        if isinstance(e, ParenExpr):
            return self.typeof(e.inner)
        return None

    # -- control flow ----------------------------------------------------------

    def always_returns(self, body: list[Stmt]) -> bool:
        for s in body:
            if isinstance(s, ReturnStmt):
                return True
            if isinstance(s, IfStmt) and s.else_body:
                if self.always_returns(s.then_body) and self.always_returns(s.else_body):
                    return True
        return False


def resolve(program: Program) -> list[Diagnostic]:
    """Resolve names, assign sites, and build contracts.

    Mutates the program in place.  Raises ResolveFailure when any error
    diagnostic was produced; returns the (possibly warning-only) list
    otherwise.
    """
    return _Resolver(program).run()
