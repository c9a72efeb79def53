"""Shared diagnostic record used by validators across the toolkit."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Diagnostic:
    """One validation finding: severity, location, human-readable message.

    Location fields are optional; text validators fill line/column,
    JSON validators fill a JSON-pointer path.
    """

    severity: str  # "error" or "warning"
    message: str
    line: int | None = None
    column: int | None = None
    pointer: str | None = None

    def __str__(self) -> str:
        loc = ""
        if self.line is not None:
            loc = f"{self.line}:{self.column if self.column is not None else 0}: "
        elif self.pointer is not None:
            loc = f"{self.pointer}: "
        return f"{self.severity}: {loc}{self.message}"


def error(message: str, **kw) -> Diagnostic:
    return Diagnostic("error", message, **kw)


def warning(message: str, **kw) -> Diagnostic:
    return Diagnostic("warning", message, **kw)


def has_errors(diags: list[Diagnostic]) -> bool:
    return any(d.severity == "error" for d in diags)


@dataclass
class DiagnosticSink:
    """Mutable collector passed into parsers that warn without failing."""

    items: list[Diagnostic] = field(default_factory=list)

    def add(self, diag: Diagnostic) -> None:
        self.items.append(diag)
