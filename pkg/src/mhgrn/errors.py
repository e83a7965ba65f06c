"""Exception types raised across the package."""


class MhgrnError(Exception):
    """Base class for every error raised by this package."""


class DimMismatch(MhgrnError, ValueError):
    pass


class AllMasked(MhgrnError, ValueError):
    pass


class NonFinite(MhgrnError, ArithmeticError):
    """An intermediate value overflowed; usually attention scores are too large."""


class UnknownRelation(MhgrnError, KeyError):
    def __str__(self):
        return f"unknown relation: {self.args[0]!r}" if self.args else "unknown relation"


class BadRelationId(MhgrnError, ValueError):
    pass


class ParseError(MhgrnError, ValueError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class EmptyMentionSet(MhgrnError, ValueError):
    pass


class UnlinkedEntity(MhgrnError, KeyError):
    def __str__(self):
        return f"entity not found in KG: {self.args[0]!r}" if self.args else "unlinked entity"


class InvalidPath(MhgrnError, ValueError):
    pass


class NoAnswerNodes(MhgrnError, ValueError):
    pass


class NoPath(MhgrnError, LookupError):
    pass


class NoTriples(MhgrnError, LookupError):
    pass


class CountOverflow(MhgrnError, OverflowError):
    pass


class IndexOutOfRange(MhgrnError, IndexError):
    pass


class ParamBudgetExceeded(MhgrnError, ValueError):
    pass
