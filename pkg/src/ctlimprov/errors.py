"""Exception hierarchy shared by every module."""


class ImprovError(Exception):
    """Base class for all library errors."""


class InvalidInstance(ImprovError, ValueError):
    pass


class SpecParseError(ImprovError):
    def __init__(self, message, path=None, lineno=None):
        self.path = path
        self.lineno = lineno
        where = ""
        if path is not None:
            where = f"{path}:"
        if lineno is not None:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}" if where else message)


class UnknownSymbol(ImprovError, KeyError):
    def __str__(self):
        return f"unknown symbol {self.args[0]!r}"


class AlphabetMismatch(ImprovError):
    pass


class ShapeMismatch(ImprovError):
    pass


class EmptyLanguage(ImprovError):
    pass


class InfiniteLanguage(ImprovError):
    pass


class EmptyRange(ImprovError):
    pass


class StateBlowup(ImprovError):
    pass


class CapExceeded(ImprovError):
    pass


class AmbiguityDetected(ImprovError):
    pass


class UnsupportedCombination(ImprovError):
    pass


class SamplingFailed(ImprovError):
    pass


class InternalError(ImprovError, AssertionError):
    pass
