"""Exception hierarchy shared by all qubitbath modules."""

from __future__ import annotations


class QubitBathError(Exception):
    """Base class for every error raised by the package."""


class InvalidInputError(QubitBathError, ValueError):
    """Arguments violate a documented precondition."""


class ResourceLimitError(QubitBathError):
    """A request exceeds a configured size cap."""


class AmbiguousGroupingError(QubitBathError):
    """The grouping tolerance cannot separate distinct energy differences."""


class GenericityError(QubitBathError):
    """A group violates the genericness assumption needed by a closed form."""


class QuadratureError(QubitBathError):
    """Adaptive quadrature did not certify its tolerance within budget.

    Attributes
    ----------
    estimates : tuple of float
        The last two integral estimates (coarse, refined).
    """

    def __init__(self, message: str, estimates: tuple = ()):
        super().__init__(message)
        self.estimates = tuple(estimates)


class EigensolverError(QubitBathError):
    """The dense eigensolver failed or its residuals could not be certified."""


class DegenerateBasisError(QubitBathError):
    """A vector family is too close to linearly dependent for a dual basis."""


class IncompleteModelError(QubitBathError):
    """Resonance data is missing for a group needed by the dynamics."""
