"""Error types shared across the toolchain."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Span:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


NO_SPAN = Span(0, 0)


class LwError(Exception):
    """Base class for all domain errors."""


class LwSyntaxError(LwError):
    def __init__(self, message: str, span: Span, expected: tuple[str, ...] = ()):
        self.message = message
        self.span = span
        self.expected = expected
        detail = f" (expected one of: {', '.join(expected)})" if expected else ""
        super().__init__(f"{span}: {message}{detail}")


class DesugarError(LwError):
    def __init__(self, message: str, span: Span = NO_SPAN):
        self.message = message
        self.span = span
        super().__init__(f"{span}: {message}")


# Kinds for LwTypeError, kept as plain strings for easy serialization.
UNBOUND_VARIABLE = "UnboundVariable"
LINEAR_VARIABLE_UNUSED = "LinearVariableUnused"
LINEAR_VARIABLE_REUSED = "LinearVariableReused"
LINEAR_VARIABLE_UNAVAILABLE_IN_SELECT = "LinearVariableUnavailableInSelect"
TIME_MISMATCH = "TimeMismatch"
SORT_MISMATCH = "SortMismatch"
TYPE_MISMATCH = "TypeMismatch"
NONEMPTY_LINEAR_CONTEXT_UNDER_G = "NonEmptyLinearContextUnderG"
UNSOLVED_INDEX_METAVARIABLE = "UnsolvedIndexMetavariable"

TYPE_ERROR_KINDS = frozenset(
    {
        UNBOUND_VARIABLE,
        LINEAR_VARIABLE_UNUSED,
        LINEAR_VARIABLE_REUSED,
        LINEAR_VARIABLE_UNAVAILABLE_IN_SELECT,
        TIME_MISMATCH,
        SORT_MISMATCH,
        TYPE_MISMATCH,
        NONEMPTY_LINEAR_CONTEXT_UNDER_G,
        UNSOLVED_INDEX_METAVARIABLE,
    }
)


class LwTypeError(LwError):
    def __init__(self, kind: str, message: str, span: Span = NO_SPAN):
        assert kind in TYPE_ERROR_KINDS, kind
        self.kind = kind
        self.message = message
        self.span = span
        super().__init__(f"{span}: {kind}: {message}")

    def to_record(self, file: str = "<input>") -> dict:
        return {
            "file": file,
            "line": self.span.line,
            "col": self.span.col,
            "kind": self.kind,
            "message": self.message,
        }


class CompatError(LwError):
    """Two incompatible commands landed on the same logbook timestep."""

    def __init__(self, time: int, cmd1, cmd2):
        self.time = time
        self.cmd1 = cmd1
        self.cmd2 = cmd2
        super().__init__(f"incompatible commands at time {time}: {cmd1} / {cmd2}")


class HorizonExceeded(LwError):
    pass


class TraceTargetInvalid(LwError):
    pass


class StuckTerm(LwError):
    """Internal error: the runtime hit a term shape the checker should rule out."""
