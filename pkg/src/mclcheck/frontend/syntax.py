"""AST for the contract mini-language.

Nodes are plain dataclasses built by the parser and annotated in place by
the resolver; after resolution they are treated as immutable.  Fields that
carry resolution results or source positions are excluded from equality so
that structural identity survives reprinting and instrumentation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, is_dataclass

from ..symexpr import IterSpace, LinConstraint, SymExpr


@dataclass(frozen=True)
class Pos:
    line: int
    col: int


NOPOS = Pos(0, 0)


@dataclass(frozen=True)
class TypeRef:
    name: str
    is_array: bool = False

    def key(self) -> str:
        return f"{self.name}[]" if self.is_array else self.name

    def element(self) -> TypeRef:
        assert self.is_array
        return TypeRef(self.name)

    def __str__(self) -> str:
        return self.key()


T_INT = TypeRef("int")
T_BOOL = TypeRef("bool")
T_STRING = TypeRef("string")
T_VOID = TypeRef("void")
T_OBJECT = TypeRef("object")  # pseudo-class used by the object-count mode

PRIMITIVES = {"int", "bool", "string", "void"}


@dataclass(frozen=True)
class Tag:
    kind: str  # return | this | user
    name: str

    @staticmethod
    def ret() -> Tag:
        return Tag("return", "Return")

    @staticmethod
    def this() -> Tag:
        return Tag("this", "This")

    @staticmethod
    def user(name: str) -> Tag:
        return Tag("user", name)

    def source_str(self) -> str:
        if self.kind == "return":
            return "return"
        if self.kind == "this":
            return "this"
        return self.name

    def counter_str(self) -> str:
        return self.name

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class PathExpr:
    root: str  # "this", "return", or a parameter name
    fields: tuple[str, ...] = ()

    def __str__(self) -> str:
        return ".".join((self.root,) + self.fields)


# --- expressions -----------------------------------------------------------

@dataclass
class Expr:
    pass


def _meta(default=None):
    return field(default=default, compare=False, repr=False)


@dataclass
class IntLit(Expr):
    value: int
    pos: Pos = _meta(NOPOS)


@dataclass
class StrLit(Expr):
    value: str
    pos: Pos = _meta(NOPOS)


@dataclass
class BoolLit(Expr):
    value: bool
    pos: Pos = _meta(NOPOS)


@dataclass
class NullLit(Expr):
    pos: Pos = _meta(NOPOS)


@dataclass
class VarRef(Expr):
    name: str
    pos: Pos = _meta(NOPOS)


@dataclass
class ThisRef(Expr):
    pos: Pos = _meta(NOPOS)


@dataclass
class FieldRef(Expr):
    base: Expr
    field: str
    pos: Pos = _meta(NOPOS)


@dataclass
class LengthRef(Expr):
    base: Expr
    pos: Pos = _meta(NOPOS)


@dataclass
class IndexRef(Expr):
    base: Expr
    index: Expr
    pos: Pos = _meta(NOPOS)


@dataclass
class Unary(Expr):
    op: str  # - or !
    operand: Expr
    pos: Pos = _meta(NOPOS)


@dataclass
class Binary(Expr):
    op: str
    left: Expr
    right: Expr
    pos: Pos = _meta(NOPOS)


@dataclass
class MaxExpr(Expr):
    left: Expr
    right: Expr
    pos: Pos = _meta(NOPOS)


@dataclass
class ParenExpr(Expr):
    inner: Expr
    pos: Pos = _meta(NOPOS)


@dataclass
class Cmp:
    """One comparison inside requires(...) or iteration_space(...)."""

    left: Expr
    rel: str
    right: Expr


# --- statements ------------------------------------------------------------

@dataclass
class Stmt:
    pass


@dataclass
class LocalDecl(Stmt):
    decl_type: TypeRef
    name: str
    init: Expr | None
    pos: Pos = _meta(NOPOS)


@dataclass
class Assign(Stmt):
    target: Expr  # VarRef, FieldRef, or IndexRef used as an lvalue
    value: Expr
    pos: Pos = _meta(NOPOS)


@dataclass
class AugAssign(Stmt):
    """target += value; emitted by the instrumenter, accepted everywhere."""

    target: Expr
    value: Expr
    pos: Pos = _meta(NOPOS)


@dataclass
class NewStmt(Stmt):
    target: Expr
    decl_type: TypeRef | None
    class_ref: TypeRef
    args: list[Expr]
    length: Expr | None = None  # set for array allocations
    dest_esc: Tag | None = None
    dest_local: bool = False
    add_esc: list[tuple[Tag, Tag]] = field(default_factory=list)
    pos: Pos = _meta(NOPOS)
    site: str | None = _meta()      # "<qname>#<ordinal>", resolver-assigned
    site_id: int | None = _meta()   # global numeric id for graph node names


@dataclass
class OutArg:
    target: Expr
    pos: Pos = _meta(NOPOS)


@dataclass
class CallStmt(Stmt):
    target: Expr | None
    decl_type: TypeRef | None
    receiver: Expr | None
    method: str
    args: list[Expr | OutArg]
    add_esc: list[tuple[Tag, Tag]] = field(default_factory=list)
    pos: Pos = _meta(NOPOS)
    resolved: str | None = _meta()  # callee qname
    site: str | None = _meta()


@dataclass
class ReturnStmt(Stmt):
    value: Expr | None
    pos: Pos = _meta(NOPOS)


@dataclass
class IfStmt(Stmt):
    cond: Expr
    then_body: list[Stmt]
    else_body: list[Stmt] = field(default_factory=list)
    pos: Pos = _meta(NOPOS)


@dataclass
class ForStmt(Stmt):
    var: str
    lo: Expr
    hi: Expr
    body: list[Stmt]
    space: list[Cmp] | None = None  # leading iteration_space(...) of the body
    pos: Pos = _meta(NOPOS)
    resolved_space: IterSpace | None = _meta()


@dataclass
class RequiresStmt(Stmt):
    constraints: list[Cmp]
    pos: Pos = _meta(NOPOS)


@dataclass
class MemReqStmt(Stmt):
    class_ref: TypeRef
    expr: Expr
    pos: Pos = _meta(NOPOS)


@dataclass
class EscStmt(Stmt):
    class_ref: TypeRef
    tag: Tag
    expr: Expr
    pos: Pos = _meta(NOPOS)


@dataclass
class BindEscStmt(Stmt):
    tag: Tag
    path: PathExpr
    pos: Pos = _meta(NOPOS)


@dataclass
class EnsureStmt(Stmt):
    cond: Expr
    pos: Pos = _meta(NOPOS)


@dataclass
class DestEscStmt(Stmt):
    """A dest_esc that did not precede an allocation; kept for the linter."""

    tag: Tag
    pos: Pos = _meta(NOPOS)


@dataclass
class DestLocalStmt(Stmt):
    pos: Pos = _meta(NOPOS)


@dataclass
class AddEscStmt(Stmt):
    dst: Tag
    src: Tag
    pos: Pos = _meta(NOPOS)


@dataclass
class IterationSpaceStmt(Stmt):
    constraints: list[Cmp]
    pos: Pos = _meta(NOPOS)


# --- declarations ----------------------------------------------------------

@dataclass
class FieldDecl:
    decl_type: TypeRef
    name: str
    pos: Pos = _meta(NOPOS)


@dataclass
class Param:
    decl_type: TypeRef
    name: str
    is_out: bool = False
    pos: Pos = _meta(NOPOS)


class MethodContract:
    """Resolved contract clauses of one method."""

    def __init__(self):
        self.requires: tuple[LinConstraint, ...] = ()
        self.mem_req: dict[str, SymExpr] = {}
        self.esc: dict[tuple[Tag, str], SymExpr] = {}
        self.bindings: dict[Tag, PathExpr] = {}

    def has_clauses(self) -> bool:
        return bool(self.mem_req or self.esc)

    def esc_total(self, type_key: str) -> SymExpr | None:
        from ..symexpr import SYM_ZERO, add
        total = None
        for (tag, key), e in self.esc.items():
            if key == type_key:
                total = e if total is None else add(total, e)
        return total


@dataclass
class MethodDecl:
    name: str
    params: list[Param]
    return_type: TypeRef
    body: list[Stmt]
    cls: str = ""
    is_ctor: bool = False
    pos: Pos = _meta(NOPOS)
    contract: MethodContract | None = _meta()

    @property
    def qname(self) -> str:
        return f"{self.cls}.{self.name}"


@dataclass
class ClassDecl:
    name: str
    fields: list[FieldDecl]
    methods: list[MethodDecl]
    pos: Pos = _meta(NOPOS)

    def field_map(self) -> dict[str, FieldDecl]:
        return {f.name: f for f in self.fields}

    def ctor(self) -> MethodDecl | None:
        for m in self.methods:
            if m.is_ctor:
                return m
        return None


@dataclass
class Program:
    classes: list[ClassDecl]
    source_name: str = _meta("<mcl>")
    resolved: bool = _meta(False)

    def class_map(self) -> dict[str, ClassDecl]:
        return {c.name: c for c in self.classes}

    def methods(self) -> list[MethodDecl]:
        return [m for c in self.classes for m in c.methods]

    def method(self, qname: str) -> MethodDecl:
        cls, _, name = qname.partition(".")
        for c in self.classes:
            if c.name == cls:
                for m in c.methods:
                    if m.name == name:
                        return m
        raise KeyError(qname)


# --- canonical serialization -------------------------------------------------

def node_to_data(node):
    """Structural dump of an AST node, dropping positions and resolution."""
    if is_dataclass(node) and not isinstance(node, type):
        out = {"kind": type(node).__name__}
        for f in fields(node):
            if not f.compare:
                continue
            out[f.name] = node_to_data(getattr(node, f.name))
        return out
    if isinstance(node, (list, tuple)):
        return [node_to_data(x) for x in node]
    if isinstance(node, (str, int, bool)) or node is None:
        return node
    return str(node)


def program_to_json(program: Program) -> str:
    return json.dumps(node_to_data(program), indent=None, separators=(",", ":"), sort_keys=False)
