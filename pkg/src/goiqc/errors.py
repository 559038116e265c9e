"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class GoiqcError(Exception):
    """Base class for errors caused by user input (exit code 1 at the CLI)."""


class ParseError(GoiqcError):
    """Malformed term, type or circuit text, located by line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class UnknownConstant(GoiqcError):
    pass


class TypingError(GoiqcError):
    pass


class LinearityError(TypingError):
    pass


class TypeMismatch(TypingError):
    pass


class BranchMismatch(TypingError):
    pass


class CircuitTypeError(GoiqcError):
    pass


class UnboundLabel(CircuitTypeError):
    pass


class LabelClash(CircuitTypeError):
    pass


class BranchEnvMismatch(CircuitTypeError):
    pass


class SignatureArityMismatch(CircuitTypeError):
    pass


class IllTyped(CircuitTypeError):
    pass


class AddressUndefined(GoiqcError):
    pass


class NonUniform(GoiqcError):
    pass


class ShapeMismatch(GoiqcError):
    pass


class ObjectMismatch(GoiqcError):
    pass


class NonUniformDistribution(GoiqcError):
    pass


class NotBoolean(GoiqcError):
    """The reference semantics only reads registers off Boolean types."""


class InvalidMove(GoiqcError):
    pass


class Deadlock(GoiqcError):
    """Raised by the machine when no move applies but tokens are still pending."""

    def __init__(self, message: str, config=None):
        super().__init__(message)
        self.config = config


class InternalError(Exception):
    """An invariant of the implementation failed (exit code 2 at the CLI)."""


class StepBudgetExceeded(InternalError):
    pass


class Stuck(InternalError):
    pass
