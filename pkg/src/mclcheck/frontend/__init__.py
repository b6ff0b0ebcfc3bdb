"""Source handling: lexing, parsing, printing, and resolution."""

from .diagnostics import (
    Diagnostic, FrontendFailure, ParseFailure, ResolveFailure,
    SEV_ERROR, SEV_WARNING,
)
from .parser import parse
from .printer import cmp_to_str, expr_to_str, pretty
from .resolver import resolve
from .syntax import (
    AddEscStmt, Assign, AugAssign, Binary, BindEscStmt, BoolLit, CallStmt,
    ClassDecl, Cmp, DestEscStmt, DestLocalStmt, EnsureStmt, EscStmt, Expr,
    FieldDecl, FieldRef, ForStmt, IfStmt, IndexRef, IntLit,
    IterationSpaceStmt, LengthRef, LocalDecl, MaxExpr, MemReqStmt,
    MethodContract, MethodDecl, NewStmt, NullLit, OutArg, ParenExpr, Param,
    PathExpr, Pos, Program, RequiresStmt, ReturnStmt, Stmt, StrLit, Tag,
    ThisRef, TypeRef, Unary, VarRef, program_to_json,
)


def load(source: str, file: str = "<mcl>") -> Program:
    """Parse and resolve in one step."""
    program = parse(source, file)
    resolve(program)
    return program


__all__ = [name for name in dir() if not name.startswith("_")]
