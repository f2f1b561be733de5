"""Exception types shared across the package."""

import numpy as np


class ShapeError(ValueError):
    """Matrix dimensions are empty, mismatched or otherwise inconsistent."""


class ConfigurationError(ValueError):
    """User-supplied configuration cannot be honoured."""


class SingularGramError(np.linalg.LinAlgError):
    """The (weighted) Gram matrix is singular or indefinite at tolerance.

    Attributes
    ----------
    min_eig : float
        Smallest eigenvalue of the offending matrix.
    n_columns : int or None
        Number of data columns that went into the Gram matrix, when known.
    """

    def __init__(self, message, min_eig=float("nan"), n_columns=None):
        super().__init__(message)
        self.min_eig = min_eig
        self.n_columns = n_columns
