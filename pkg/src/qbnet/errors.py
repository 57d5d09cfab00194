"""Exception hierarchy.

Every error carries a ``kind`` string naming the failure; the CLI prints it
and tests match on it.
"""
from __future__ import annotations

from dataclasses import dataclass


class QBNetError(Exception):
    kind = "QBNetError"


class OverlappingRegisters(QBNetError):
    kind = "OverlappingRegisters"


class UnknownRegister(QBNetError):
    kind = "UnknownRegister"


class UnknownState(QBNetError):
    kind = "UnknownState"


class UnknownNode(QBNetError):
    kind = "UnknownNode"


class DimensionMismatch(QBNetError):
    kind = "DimensionMismatch"


class DimensionCapExceeded(QBNetError):
    kind = "DimensionCapExceeded"


class NotOrthonormalInput(QBNetError):
    kind = "NotOrthonormalInput"


class NotHermitian(QBNetError):
    kind = "NotHermitian"


class NotDecoratedMarginalizer(QBNetError):
    kind = "NotDecoratedMarginalizer"


class NotDecoratedGrounded(QBNetError):
    kind = "NotDecoratedGrounded"


class InvalidNet(QBNetError):
    kind = "InvalidNet"


class InvalidPlan(QBNetError):
    kind = "InvalidPlan"


class ZeroProbabilityOutcome(QBNetError):
    kind = "ZeroProbabilityOutcome"


class InvalidKraus(QBNetError):
    kind = "InvalidKraus"


class InvalidRinno(QBNetError):
    kind = "InvalidRinno"


class NotDensityMatrix(QBNetError):
    kind = "NotDensityMatrix"


class InvalidEnsemble(QBNetError):
    kind = "InvalidEnsemble"


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


class ParseError(QBNetError):
    """Base for text-format errors; ``span`` points into the offending token."""

    kind = "ParseError"

    def __init__(self, message: str, span: SourceSpan | None = None):
        self.message = message
        self.span = span
        where = f"line {span.line}, column {span.column}: " if span else ""
        super().__init__(where + message)


class QBNSyntaxError(ParseError):
    kind = "SyntaxError"


class DuplicateNode(ParseError):
    kind = "DuplicateNode"


class UnknownParent(ParseError):
    kind = "UnknownParent"


class UndeclaredNode(UnknownParent):
    """An ``amp`` line names a node that has not been declared yet."""

    kind = "UndeclaredNode"


class DuplicateAmplitudeEntry(ParseError):
    kind = "DuplicateAmplitudeEntry"


class BadDecoration(ParseError):
    kind = "BadDecoration"


class ShapeMismatch(ParseError):
    kind = "ShapeMismatch"
