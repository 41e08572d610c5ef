"""Exception hierarchy shared by all modules."""


class AnlsError(Exception):
    """Base class for every error raised by :mod:`anls`."""


class ParameterError(AnlsError, ValueError):
    """An argument is outside its admissible range."""


class ShapeError(AnlsError, ValueError):
    """Two fields (or a field and an operator) live on different bands."""


class BlockIndexError(AnlsError, IndexError):
    """A Littlewood-Paley block index is outside ``-1..J``."""


class DegenerateInputError(AnlsError, ValueError):
    """The input carries no information for the requested estimate."""


class ConstructionError(AnlsError, RuntimeError):
    """An object could not be built at the requested resolution."""


class NumericError(AnlsError, ArithmeticError):
    """A numerical procedure failed; ``diagnostics`` holds what is known."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics
