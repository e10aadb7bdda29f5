"""Exception hierarchy shared by all hypotor modules."""


class HypotorError(Exception):
    """Base class for all errors raised by the package."""


class PreconditionError(HypotorError, ValueError):
    """An operation was called on input that violates its contract."""


class RefinementExhausted(HypotorError):
    """Enclosure refinement hit its budget before a decision was certified."""


class TooFewPoints(HypotorError, ValueError):
    """A fit or diagnostic did not receive enough usable data."""


class SpecParseError(HypotorError, ValueError):
    """A spec file could not be parsed; carries the location when known."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class NoneWithinBudget(HypotorError):
    """A search finished its budget without finding what was required.

    ``partial`` holds whatever was found before the budget ran out.
    """

    def __init__(self, message, partial=None):
        self.partial = partial
        super().__init__(message)
