"""Exception hierarchy shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """Input outside the physical domain (T not in [0, 1], non-finite values, ...)."""


class OrthogonalityError(DomainError):
    """Interfering states are orthogonal, so their relative phase is undefined."""


class GeodesicError(DomainError):
    """Geodesic between antipodal points is ill-defined."""


class UnidentifiableError(DomainError):
    """A fit parameter has no influence on the objective."""


class ParseError(Exception):
    """Positioned error raised by the circuit and sweep parsers."""

    def __init__(self, message: str, line: int = 1, column: int = 1, snippet: str = ""):
        if not message:
            message = "parse error"
        super().__init__(message)
        self.message = message
        self.line = line
        self.column = column
        self.snippet = snippet

    def __str__(self) -> str:
        out = f"line {self.line}, column {self.column}: {self.message}"
        if self.snippet:
            out += f"\n  {self.snippet}\n  {' ' * (self.column - 1)}^"
        return out
