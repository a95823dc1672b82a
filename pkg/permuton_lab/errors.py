#!/usr/bin/env python

"""Exception types shared across permuton_lab."""

from __future__ import annotations

###############################################################################


class PreconditionError(ValueError):
    """Raised when an argument is outside the domain of an operation."""


class SizeBoundError(ValueError):
    """Raised when an exact computation is asked for beyond its size bound."""


class StructuralError(ValueError):
    """Raised for malformed trees, streams or grids."""


class IncomparableError(ValueError):
    """Raised when an order is not total on the given points."""

    def __init__(self, message: str, pair: tuple[object, object] | None = None):
        super().__init__(message)
        self.pair = pair


class ResolutionMismatchError(ValueError):
    """Raised when two grid measures have different resolutions."""


class QuadratureError(RuntimeError):
    """Raised when adaptive quadrature does not reach the requested tolerance."""

    def __init__(self, message: str, estimate: float, abserr: float):
        super().__init__(message)
        self.estimate = estimate
        self.abserr = abserr
