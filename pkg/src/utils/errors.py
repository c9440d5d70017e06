"""Exception hierarchy shared by every package of the lab."""

import numpy as np


class LabError(Exception):
    """Base class for all errors the lab raises on bad input."""


class DomainError(LabError, ValueError):
    """An argument lies outside the domain of the operation (empty vector, beta <= 0, t < 0)."""


class ShapeError(LabError, ValueError):
    """Array shapes are inconsistent with each other."""


class FactorizationError(LabError, np.linalg.LinAlgError):
    """A covariance matrix could not be factored (not symmetric or not PSD)."""


class PreconditionError(LabError, ValueError):
    """A stated precondition of a bound or estimator does not hold."""


class RegimeError(PreconditionError):
    """The inverse temperature lies outside the regime where a bound is stated."""


class CapacityError(LabError, ValueError):
    """An exact enumeration was requested beyond its supported size."""


class GridMismatchError(LabError, ValueError):
    """Two curves that must share a time grid do not."""


class NonIntegrablePsiError(LabError, ValueError):
    """The criterion function fails the integrability condition of the variance theorem."""


class ManifestError(LabError, ValueError):
    """An experiment manifest failed validation.

    Args:
        path: dotted path of the offending entry (e.g. ``params.beta``)
        message: what is wrong with it
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")
