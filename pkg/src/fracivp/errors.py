"""Exception hierarchy shared by all fracivp modules."""


class FracError(Exception):
    """Base class for every error raised by fracivp."""


class DomainError(FracError, ValueError):
    """An argument lies outside the domain of a function.

    ``offset`` and ``snippet`` locate the offending subexpression when the
    error originates from evaluating a parsed right-hand side.
    """

    def __init__(self, message, offset=None, snippet=None, point=None):
        self.offset = offset
        self.snippet = snippet
        self.point = point
        if offset is not None:
            message = f"{message} (at offset {offset}: {snippet!r})"
        if point is not None:
            message = f"{message} [point {point}]"
        super().__init__(message)


class ParseError(FracError):
    def __init__(self, message, offset):
        self.offset = offset
        super().__init__(f"{message} at offset {offset}")


class UnknownIdentifierError(ParseError):
    pass


class ArityError(ParseError):
    pass


class GridTooCoarseError(FracError):
    pass


class UnsupportedCaseError(FracError):
    pass


class HypothesisError(FracError):
    """The problem violates the hypotheses of its equivalence case."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


class ConvergenceError(FracError):
    def __init__(self, message, node=None):
        self.node = node
        super().__init__(message)


class CorpusIntegrityError(FracError):
    pass


class ProblemFileError(FracError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
