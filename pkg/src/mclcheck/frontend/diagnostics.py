"""Diagnostics shared by the frontend and the checkers."""

from __future__ import annotations

from dataclasses import dataclass

SEV_ERROR = "error"
SEV_WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    message: str
    file: str = "<mcl>"
    line: int = 0
    col: int = 0

    def to_json(self) -> dict:
        return {
            "severity": self.severity,
            "code": self.code,
            "message": self.message,
            "file": self.file,
            "line": self.line,
            "col": self.col,
        }

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.col}: {self.severity}: {self.code}: {self.message}"


class FrontendFailure(Exception):
    """Carries the diagnostics that stopped a frontend pass."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics) or "frontend failure")


class ParseFailure(FrontendFailure):
    pass


class ResolveFailure(FrontendFailure):
    pass
