"""Exception hierarchy shared across the package."""

from __future__ import annotations


class TransarithError(Exception):
    """Base class for every error raised by this package."""


class SourceSpan:
    """Byte offsets (start, end) of a token or region in input text."""

    __slots__ = ("start", "end")

    def __init__(self, start: int, end: int):
        if start > end:
            raise ValueError("span start must not exceed end")
        self.start = start
        self.end = end

    def __repr__(self):
        return f"SourceSpan({self.start}, {self.end})"

    def __eq__(self, other):
        return (
            isinstance(other, SourceSpan)
            and self.start == other.start
            and self.end == other.end
        )


class ParseError(TransarithError):
    """Malformed input text; always carries the offending span."""

    def __init__(self, message: str, span: SourceSpan):
        super().__init__(f"{message} (at {span.start}..{span.end})")
        self.span = span


class DomainError(TransarithError):
    """Evaluation hit a singularity (log of zero, division by zero, 0^0).

    ``definitely_singular`` distinguishes an exact pole from a box that
    merely failed to exclude the singular point at the current precision;
    the latter may succeed on retry at higher precision.
    """

    def __init__(self, message: str, definitely_singular: bool = False):
        super().__init__(message)
        self.definitely_singular = definitely_singular


class IndeterminateBranch(DomainError):
    """A box straddles the principal-branch cut; higher precision may help."""

    def __init__(self, message: str):
        super().__init__(message, definitely_singular=False)


class UnboundSymbol(TransarithError):
    """Numeric evaluation reached a free symbol."""


class PrecisionExhausted(TransarithError):
    """The precision-escalation ceiling was reached; carries the last box."""

    def __init__(self, message: str, last_box=None):
        super().__init__(message)
        self.last_box = last_box


class Indeterminate(TransarithError):
    """A certified comparison could not be decided below the precision ceiling."""


class NoSolution(TransarithError):
    """The equation has no solution for the given input."""


class NoBracket(TransarithError):
    """A sign-change scan found no bracket in the search range."""


class ZeroInput(TransarithError):
    """An input that must be nonzero was zero."""


class NonPositiveInput(TransarithError):
    """An input that must be a positive real (and not 1) was not."""


class DegenerateInput(TransarithError):
    """Input boxes are too wide for the requested relation search."""


class ExactMethodUnavailable(TransarithError):
    """Exact factorization declined input outside the desk-scale bound."""


class MalformedStatement(TransarithError):
    """A ledger statement violates a well-formedness invariant."""


class SchemaViolation(TransarithError):
    """A rule application failed its premise/conclusion schema; names the check."""


class UnknownRule(TransarithError):
    """Rule name outside the closed registry."""


class BadPremiseIndex(TransarithError):
    """A premise index is out of range or not strictly backward."""


class InconsistentAssumptions(TransarithError):
    """The declared assumption set contradicts itself."""


class NumericVerificationFailed(TransarithError):
    """A classifier rule's numeric side condition failed to certify."""
