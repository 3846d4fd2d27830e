"""
Exception hierarchy shared by the solver services, the sweep tasks and the CLI.
"""


class FracwaveError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FracwaveError, ValueError):
    """A parameter lies outside its admissible range."""


class ConfigValidationError(FracwaveError):
    """An experiment configuration or command line could not be validated."""


class NumericalFailure(FracwaveError):
    """A numerical kernel could not produce a trustworthy result."""


class SingularSystemError(NumericalFailure):
    """Tridiagonal elimination met a vanishing pivot."""

    def __init__(self, row: int, pivot: float):
        super().__init__(f"Pivot {pivot!r} at row {row} is below the elimination threshold")
        self.row = row
        self.pivot = pivot


class SoeConstructionError(NumericalFailure):
    """The sum-of-exponentials fit missed its tolerance after the node budget ran out."""
